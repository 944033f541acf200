// Kernel loop bodies, instantiated once per lane. Tails of vector loops are
// evaluated with the scalar core so both lanes agree elementwise.
#pragma once

#include "opd/simd.hpp"
#include "vec.hpp"

namespace opd::simd::detail {

template <class V>
void vexp_impl(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) exp_core(V::load(x + i)).store(out + i);
  for (; i < n; ++i) out[i] = exp_core(VecScalar{x[i]}).v;
}

template <class V>
void vlog_impl(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) log_core(V::load(x + i)).store(out + i);
  for (; i < n; ++i) out[i] = log_core(VecScalar{x[i]}).v;
}

template <class V>
void exp_affine_impl(const double* x, double* out, std::size_t n, double a, double b) {
  const V va = V::set1(a), vb = V::set1(b);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    exp_core(fmadd(V::load(x + i), va, vb)).store(out + i);
  for (; i < n; ++i)
    out[i] = exp_core(fmadd(VecScalar{x[i]}, VecScalar{a}, VecScalar{b})).v;
}

inline double hsum(VecScalar a) { return a.v; }
#if defined(__AVX2__)
inline double hsum(VecAvx2 a) {
  alignas(32) double l[4];
  _mm256_store_pd(l, a.v);
  return (l[0] + l[1]) + (l[2] + l[3]);
}
#endif

template <class V>
double sum_impl(const double* x, std::size_t n) {
  V acc = V::set1(0.0);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) acc = acc + V::load(x + i);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

template <class V>
void minmax_impl(const double* x, std::size_t n, double& mn_out, double& mx_out) {
  double mn = x[0], mx = x[0];
  V vmn = V::set1(x[0]), vmx = V::set1(x[0]);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    V v = V::load(x + i);
    vmn = select(cmp_lt(v, vmn), v, vmn);
    vmx = select(cmp_gt(v, vmx), v, vmx);
  }
  double lanes_mn[V::width], lanes_mx[V::width];
  vmn.store(lanes_mn);
  vmx.store(lanes_mx);
  for (std::size_t j = 0; j < V::width; ++j) {
    mn = lanes_mn[j] < mn ? lanes_mn[j] : mn;
    mx = lanes_mx[j] > mx ? lanes_mx[j] : mx;
  }
  for (; i < n; ++i) {
    mn = x[i] < mn ? x[i] : mn;
    mx = x[i] > mx ? x[i] : mx;
  }
  mn_out = mn;
  mx_out = mx;
}

template <class V>
double sum_exp_affine_impl(const double* x, std::size_t n, double a, double b) {
  const V va = V::set1(a), vb = V::set1(b);
  V acc = V::set1(0.0);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    acc = acc + exp_core(fmadd(V::load(x + i), va, vb));
  double s = hsum(acc);
  for (; i < n; ++i)
    s += exp_core(fmadd(VecScalar{x[i]}, VecScalar{a}, VecScalar{b})).v;
  return s;
}

// PDL(delta, y), general branch:
//   (y * (exp(lambda*(log y - log delta)) - 1) + lambda*(delta - y)) / (lambda*(lambda+1))
template <class V>
void pdl_general_impl(double delta, double log_delta, const double* y,
                      const double* log_y, double* out, std::size_t n, double lambda) {
  const double inv = 1.0 / (lambda * (lambda + 1.0));
  const V vl = V::set1(lambda), vld = V::set1(log_delta), vd = V::set1(delta),
          vinv = V::set1(inv), one = V::set1(1.0);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    V yy = V::load(y + i);
    V t = vl * (V::load(log_y + i) - vld);
    V ratio_pow = exp_core(t);
    V val = fmadd(yy, ratio_pow - one, vl * (vd - yy)) * vinv;
    val.store(out + i);
  }
  for (; i < n; ++i) {
    VecScalar yy{y[i]};
    VecScalar t{lambda * (log_y[i] - log_delta)};
    VecScalar rp = exp_core(t);
    out[i] = std::fma(yy.v, rp.v - 1.0, lambda * (delta - yy.v)) * inv;
  }
}

// lambda = 0:  y*(log y - log delta) - (y - delta)
template <class V>
void pdl_zero_impl(double delta, double log_delta, const double* y,
                   const double* log_y, double* out, std::size_t n) {
  const V vld = V::set1(log_delta), vd = V::set1(delta);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    V yy = V::load(y + i);
    V val = yy * (V::load(log_y + i) - vld) - (yy - vd);
    val.store(out + i);
  }
  for (; i < n; ++i) out[i] = y[i] * (log_y[i] - log_delta) - (y[i] - delta);
}

// lambda = -1:  (y - delta) - delta*(log y - log delta)
template <class V>
void pdl_neg_one_impl(double delta, double log_delta, const double* y,
                      const double* log_y, double* out, std::size_t n) {
  const V vld = V::set1(log_delta), vd = V::set1(delta);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    V yy = V::load(y + i);
    V val = (yy - vd) - vd * (V::load(log_y + i) - vld);
    val.store(out + i);
  }
  for (; i < n; ++i) out[i] = (y[i] - delta) - delta * (log_y[i] - log_delta);
}

template <class V>
void pdl_loss_batch_impl(double delta, double log_delta, const double* y,
                         const double* log_y, double* out, std::size_t n,
                         double lambda, PdlBranch branch) {
  switch (branch) {
    case PdlBranch::zero:
      pdl_zero_impl<V>(delta, log_delta, y, log_y, out, n);
      break;
    case PdlBranch::neg_one:
      pdl_neg_one_impl<V>(delta, log_delta, y, log_y, out, n);
      break;
    case PdlBranch::general:
      pdl_general_impl<V>(delta, log_delta, y, log_y, out, n, lambda);
      break;
  }
}

// Per-element predictor variants.
template <class V>
void pdl_loss_batch_v_impl(const double* delta, const double* log_delta,
                           const double* y, const double* log_y, double* out,
                           std::size_t n, double lambda, PdlBranch branch) {
  std::size_t i = 0;
  switch (branch) {
    case PdlBranch::zero: {
      for (; i + V::width <= n; i += V::width) {
        V yy = V::load(y + i), vd = V::load(delta + i);
        V val = yy * (V::load(log_y + i) - V::load(log_delta + i)) - (yy - vd);
        val.store(out + i);
      }
      for (; i < n; ++i)
        out[i] = y[i] * (log_y[i] - log_delta[i]) - (y[i] - delta[i]);
      break;
    }
    case PdlBranch::neg_one: {
      for (; i + V::width <= n; i += V::width) {
        V yy = V::load(y + i), vd = V::load(delta + i);
        V val = (yy - vd) - vd * (V::load(log_y + i) - V::load(log_delta + i));
        val.store(out + i);
      }
      for (; i < n; ++i)
        out[i] = (y[i] - delta[i]) - delta[i] * (log_y[i] - log_delta[i]);
      break;
    }
    case PdlBranch::general: {
      const double inv = 1.0 / (lambda * (lambda + 1.0));
      const V vl = V::set1(lambda), vinv = V::set1(inv), one = V::set1(1.0);
      for (; i + V::width <= n; i += V::width) {
        V yy = V::load(y + i), vd = V::load(delta + i);
        V t = vl * (V::load(log_y + i) - V::load(log_delta + i));
        V val = fmadd(yy, exp_core(t) - one, vl * (vd - yy)) * vinv;
        val.store(out + i);
      }
      for (; i < n; ++i) {
        VecScalar t{lambda * (log_y[i] - log_delta[i])};
        out[i] = std::fma(y[i], exp_core(t).v - 1.0, lambda * (delta[i] - y[i])) * inv;
      }
      break;
    }
  }
}

struct KernelTable {
  void (*vexp)(const double*, double*, std::size_t);
  void (*vlog)(const double*, double*, std::size_t);
  void (*exp_affine)(const double*, double*, std::size_t, double, double);
  double (*sum)(const double*, std::size_t);
  void (*minmax)(const double*, std::size_t, double&, double&);
  double (*sum_exp_affine)(const double*, std::size_t, double, double);
  void (*pdl_loss_batch)(double, double, const double*, const double*, double*,
                         std::size_t, double, PdlBranch);
  void (*pdl_loss_batch_v)(const double*, const double*, const double*,
                           const double*, double*, std::size_t, double, PdlBranch);
};

extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif

template <class V>
constexpr KernelTable make_table() {
  return KernelTable{vexp_impl<V>,   vlog_impl<V>,           exp_affine_impl<V>,
                     sum_impl<V>,    minmax_impl<V>,         sum_exp_affine_impl<V>,
                     pdl_loss_batch_impl<V>, pdl_loss_batch_v_impl<V>};
}

}  // namespace opd::simd::detail
