// Vector abstraction shared by the scalar and AVX2 kernel translation units.
// Kernel algorithms are written once against this interface; both lanes run
// the same operation sequence, so elementwise results match bit for bit.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace opd::simd::detail {

// ---------------------------------------------------------------------------
// Scalar lane
// ---------------------------------------------------------------------------
struct IVecScalar {
  std::int64_t v;
  static IVecScalar set1(std::int64_t x) { return {x}; }
};

struct VecScalar {
  static constexpr std::size_t width = 1;
  using IVec = IVecScalar;
  double v;

  static VecScalar load(const double* p) { return {*p}; }
  void store(double* p) const { *p = v; }
  static VecScalar set1(double x) { return {x}; }
};

using MaskScalar = bool;

inline VecScalar operator+(VecScalar a, VecScalar b) { return {a.v + b.v}; }
inline VecScalar operator-(VecScalar a, VecScalar b) { return {a.v - b.v}; }
inline VecScalar operator*(VecScalar a, VecScalar b) { return {a.v * b.v}; }
inline VecScalar operator/(VecScalar a, VecScalar b) { return {a.v / b.v}; }

inline VecScalar fmadd(VecScalar a, VecScalar b, VecScalar c) {
  return {std::fma(a.v, b.v, c.v)};
}
// c - a*b
inline VecScalar fnmadd(VecScalar a, VecScalar b, VecScalar c) {
  return {std::fma(-a.v, b.v, c.v)};
}
inline VecScalar floor_(VecScalar a) { return {std::floor(a.v)}; }
inline MaskScalar cmp_lt(VecScalar a, VecScalar b) { return a.v < b.v; }
inline MaskScalar cmp_gt(VecScalar a, VecScalar b) { return a.v > b.v; }
inline MaskScalar cmp_eq(VecScalar a, VecScalar b) { return a.v == b.v; }
inline MaskScalar cmp_unord(VecScalar a, VecScalar b) {
  return std::isnan(a.v) || std::isnan(b.v);
}
inline VecScalar select(MaskScalar m, VecScalar a, VecScalar b) { return m ? a : b; }

inline IVecScalar as_int(VecScalar a) {
  std::int64_t r;
  std::memcpy(&r, &a.v, 8);
  return {r};
}
inline VecScalar as_double(IVecScalar a) {
  double r;
  std::memcpy(&r, &a.v, 8);
  return {r};
}
inline IVecScalar iadd(IVecScalar a, IVecScalar b) { return {a.v + b.v}; }
inline IVecScalar isub(IVecScalar a, IVecScalar b) { return {a.v - b.v}; }
inline IVecScalar iand(IVecScalar a, std::uint64_t m) {
  return {static_cast<std::int64_t>(static_cast<std::uint64_t>(a.v) & m)};
}
inline IVecScalar ior(IVecScalar a, std::uint64_t m) {
  return {static_cast<std::int64_t>(static_cast<std::uint64_t>(a.v) | m)};
}
inline IVecScalar ishr_logic(IVecScalar a, int k) {
  return {static_cast<std::int64_t>(static_cast<std::uint64_t>(a.v) >> k)};
}
inline IVecScalar ishl(IVecScalar a, int k) { return {a.v << k}; }

// Integer-valued double with small magnitude -> int64 (exact), and back.
inline IVecScalar to_int_small(VecScalar a) {
  return {static_cast<std::int64_t>(static_cast<std::int32_t>(a.v))};
}
inline VecScalar int_to_double_small(IVecScalar a) {
  return {static_cast<double>(a.v)};
}

// ---------------------------------------------------------------------------
// AVX2 lane (compiled only in the AVX2 translation unit)
// ---------------------------------------------------------------------------
#if defined(__AVX2__)
struct IVecAvx2 {
  __m256i v;
  static IVecAvx2 set1(std::int64_t x) { return {_mm256_set1_epi64x(x)}; }
};

struct VecAvx2 {
  static constexpr std::size_t width = 4;
  using IVec = IVecAvx2;
  __m256d v;

  static VecAvx2 load(const double* p) { return {_mm256_loadu_pd(p)}; }
  void store(double* p) const { _mm256_storeu_pd(p, v); }
  static VecAvx2 set1(double x) { return {_mm256_set1_pd(x)}; }
};

using MaskAvx2 = __m256d;

inline VecAvx2 operator+(VecAvx2 a, VecAvx2 b) { return {_mm256_add_pd(a.v, b.v)}; }
inline VecAvx2 operator-(VecAvx2 a, VecAvx2 b) { return {_mm256_sub_pd(a.v, b.v)}; }
inline VecAvx2 operator*(VecAvx2 a, VecAvx2 b) { return {_mm256_mul_pd(a.v, b.v)}; }
inline VecAvx2 operator/(VecAvx2 a, VecAvx2 b) { return {_mm256_div_pd(a.v, b.v)}; }

inline VecAvx2 fmadd(VecAvx2 a, VecAvx2 b, VecAvx2 c) {
  return {_mm256_fmadd_pd(a.v, b.v, c.v)};
}
inline VecAvx2 fnmadd(VecAvx2 a, VecAvx2 b, VecAvx2 c) {
  return {_mm256_fnmadd_pd(a.v, b.v, c.v)};
}
inline VecAvx2 floor_(VecAvx2 a) {
  return {_mm256_round_pd(a.v, _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC)};
}
inline MaskAvx2 cmp_lt(VecAvx2 a, VecAvx2 b) { return _mm256_cmp_pd(a.v, b.v, _CMP_LT_OQ); }
inline MaskAvx2 cmp_gt(VecAvx2 a, VecAvx2 b) { return _mm256_cmp_pd(a.v, b.v, _CMP_GT_OQ); }
inline MaskAvx2 cmp_eq(VecAvx2 a, VecAvx2 b) { return _mm256_cmp_pd(a.v, b.v, _CMP_EQ_OQ); }
inline MaskAvx2 cmp_unord(VecAvx2 a, VecAvx2 b) { return _mm256_cmp_pd(a.v, b.v, _CMP_UNORD_Q); }
inline VecAvx2 select(MaskAvx2 m, VecAvx2 a, VecAvx2 b) {
  return {_mm256_blendv_pd(b.v, a.v, m)};
}

inline IVecAvx2 as_int(VecAvx2 a) { return {_mm256_castpd_si256(a.v)}; }
inline VecAvx2 as_double(IVecAvx2 a) { return {_mm256_castsi256_pd(a.v)}; }
inline IVecAvx2 iadd(IVecAvx2 a, IVecAvx2 b) { return {_mm256_add_epi64(a.v, b.v)}; }
inline IVecAvx2 isub(IVecAvx2 a, IVecAvx2 b) { return {_mm256_sub_epi64(a.v, b.v)}; }
inline IVecAvx2 iand(IVecAvx2 a, std::uint64_t m) {
  return {_mm256_and_si256(a.v, _mm256_set1_epi64x(static_cast<long long>(m)))};
}
inline IVecAvx2 ior(IVecAvx2 a, std::uint64_t m) {
  return {_mm256_or_si256(a.v, _mm256_set1_epi64x(static_cast<long long>(m)))};
}
inline IVecAvx2 ishr_logic(IVecAvx2 a, int k) { return {_mm256_srli_epi64(a.v, k)}; }
inline IVecAvx2 ishl(IVecAvx2 a, int k) { return {_mm256_slli_epi64(a.v, k)}; }

inline IVecAvx2 to_int_small(VecAvx2 a) {
  __m128i i32 = _mm256_cvtpd_epi32(a.v);  // round-to-nearest; inputs are integral
  return {_mm256_cvtepi32_epi64(i32)};
}
inline VecAvx2 int_to_double_small(IVecAvx2 a) {
  // Lanes hold small signed values; compact the low dwords and convert.
  __m256i perm = _mm256_permutevar8x32_epi32(a.v, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0));
  return {_mm256_cvtepi32_pd(_mm256_castsi256_si128(perm))};
}
#endif  // __AVX2__

// ---------------------------------------------------------------------------
// Kernel algorithms (Cephes-style exp/log rational approximations)
// ---------------------------------------------------------------------------
inline constexpr double kExpMaxArg = 709.782712893383996843;
inline constexpr double kExpMinArg = -708.396418532264106224;
inline constexpr double kLog2E = 1.4426950408889634073599;
inline constexpr double kLn2Hi = 6.93145751953125e-1;
inline constexpr double kLn2Lo = 1.42860682030941723212e-6;
inline constexpr double kSqrtHalf = 0.70710678118654752440;

// 2^k as a double, valid for |k| <= 1022.
inline VecScalar pow2i(IVecScalar k) {
  return as_double(ishl(iadd(k, IVecScalar::set1(1023)), 52));
}
#if defined(__AVX2__)
inline VecAvx2 pow2i(IVecAvx2 k) {
  return as_double(ishl(iadd(k, IVecAvx2::set1(1023)), 52));
}
#endif

template <class V>
inline V exp_core(V x) {
  V n = floor_(fmadd(x, V::set1(kLog2E), V::set1(0.5)));
  V r = fnmadd(n, V::set1(kLn2Hi), x);
  r = fnmadd(n, V::set1(kLn2Lo), r);
  V rr = r * r;
  V p = fmadd(rr, V::set1(1.26177193074810590878e-4), V::set1(3.02994407707441961300e-2));
  p = fmadd(p, rr, V::set1(9.99999999999999999910e-1));
  p = p * r;
  V q = fmadd(rr, V::set1(3.00198505138664455042e-6), V::set1(2.52448340349684104192e-3));
  q = fmadd(q, rr, V::set1(2.27265548208155028766e-1));
  q = fmadd(q, rr, V::set1(2.00000000000000000005e0));
  V e = p / (q - p);
  e = fmadd(V::set1(2.0), e, V::set1(1.0));
  // Scale by 2^n in two halves; n = +-1024 would overflow a single factor.
  // k is in [-1075, 1025]; the +2048 bias makes the logical shift a floor/2.
  using IV = typename V::IVec;
  auto k = to_int_small(n);
  auto k1 = isub(ishr_logic(iadd(k, IV::set1(2048)), 1), IV::set1(1024));
  auto k2 = isub(k, k1);
  e = e * pow2i(k1);
  e = e * pow2i(k2);
  e = select(cmp_gt(x, V::set1(kExpMaxArg)), V::set1(std::numeric_limits<double>::infinity()), e);
  e = select(cmp_lt(x, V::set1(kExpMinArg)), V::set1(0.0), e);
  e = select(cmp_unord(x, x), x, e);
  return e;
}

template <class V>
inline V log_core(V x) {
  const V zero = V::set1(0.0);
  const V inf = V::set1(std::numeric_limits<double>::infinity());
  // Rescale subnormals so the exponent-field extraction below is valid.
  auto sub_mask = cmp_lt(x, V::set1(2.2250738585072014e-308));
  V xs = select(sub_mask, x * V::set1(1.8014398509481984e16), x);  // * 2^54

  auto bits = as_int(xs);
  V e = int_to_double_small(ishr_logic(bits, 52)) - V::set1(1022.0);
  e = select(sub_mask, e - V::set1(54.0), e);
  V m = as_double(ior(iand(bits, 0x000FFFFFFFFFFFFFull), 0x3FE0000000000000ull));

  auto lo = cmp_lt(m, V::set1(kSqrtHalf));
  e = select(lo, e - V::set1(1.0), e);
  m = select(lo, m + m, m);

  V z = m - V::set1(1.0);
  V zz = z * z;
  V p = fmadd(z, V::set1(1.01875663804580931796e-4), V::set1(4.97494994976747001425e-1));
  p = fmadd(p, z, V::set1(4.70579119878881725854e0));
  p = fmadd(p, z, V::set1(1.44989225341610930846e1));
  p = fmadd(p, z, V::set1(1.79368678507819816313e1));
  p = fmadd(p, z, V::set1(7.70838733755885391666e0));
  V q = z + V::set1(1.12873587189167450590e1);
  q = fmadd(q, z, V::set1(4.52279145837532221105e1));
  q = fmadd(q, z, V::set1(8.29875266912776603211e1));
  q = fmadd(q, z, V::set1(7.11544750618563894466e1));
  q = fmadd(q, z, V::set1(2.31251620126765340583e1));

  V y = z * zz * (p / q);
  y = fnmadd(e, V::set1(2.121944400546905827679e-4), y);
  y = fnmadd(V::set1(0.5), zz, y);
  V r = z + y;
  r = fmadd(e, V::set1(0.693359375), r);

  r = select(cmp_eq(x, zero), zero - inf, r);
  r = select(cmp_lt(x, zero), V::set1(std::numeric_limits<double>::quiet_NaN()), r);
  r = select(cmp_eq(x, inf), inf, r);
  r = select(cmp_unord(x, x), x, r);
  return r;
}

}  // namespace opd::simd::detail
