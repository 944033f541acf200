#include "opd/simd.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace opd::simd {
namespace detail {

#if defined(__x86_64__) || defined(_M_X64)
#define OPD_HAVE_AVX2_TU 1
#endif

namespace {

bool cpu_has_avx2() {
#if defined(OPD_HAVE_AVX2_TU)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Active {
  Lane lane;
  const KernelTable* table;
};

Active pick_initial() {
  Lane lane = cpu_has_avx2() ? Lane::avx2 : Lane::scalar;
  if (const char* env = std::getenv("OPD_SIMD")) {
    std::string s(env);
    if (s == "scalar") lane = Lane::scalar;
    else if (s == "avx2" && cpu_has_avx2()) lane = Lane::avx2;
  }
#if defined(OPD_HAVE_AVX2_TU)
  return {lane, lane == Lane::avx2 ? &kAvx2Table : &kScalarTable};
#else
  return {lane, &kScalarTable};
#endif
}

Active& active() {
  static Active a = pick_initial();
  return a;
}

}  // namespace
}  // namespace detail

Lane active_lane() { return detail::active().lane; }

const char* lane_name(Lane lane) {
  return lane == Lane::avx2 ? "avx2" : "scalar";
}

bool lane_supported(Lane lane) {
  return lane == Lane::scalar || detail::cpu_has_avx2();
}

void force_lane(Lane lane) {
  if (!lane_supported(lane))
    throw std::runtime_error("simd lane not supported on this CPU");
#if defined(OPD_HAVE_AVX2_TU)
  detail::active() = {lane, lane == Lane::avx2 ? &detail::kAvx2Table
                                               : &detail::kScalarTable};
#else
  detail::active() = {Lane::scalar, &detail::kScalarTable};
#endif
}

void vexp(const double* x, double* out, std::size_t n) {
  detail::active().table->vexp(x, out, n);
}
void vlog(const double* x, double* out, std::size_t n) {
  detail::active().table->vlog(x, out, n);
}
void exp_affine(const double* x, double* out, std::size_t n, double a, double b) {
  detail::active().table->exp_affine(x, out, n, a, b);
}
double sum(const double* x, std::size_t n) {
  return detail::active().table->sum(x, n);
}
void minmax(const double* x, std::size_t n, double& mn, double& mx) {
  detail::active().table->minmax(x, n, mn, mx);
}
double sum_exp_affine(const double* x, std::size_t n, double a, double b) {
  return detail::active().table->sum_exp_affine(x, n, a, b);
}
void pdl_loss_batch(double delta, double log_delta, const double* y,
                    const double* log_y, double* out, std::size_t n,
                    double lambda, PdlBranch branch) {
  detail::active().table->pdl_loss_batch(delta, log_delta, y, log_y, out, n,
                                         lambda, branch);
}
void pdl_loss_batch_v(const double* delta, const double* log_delta,
                      const double* y, const double* log_y, double* out,
                      std::size_t n, double lambda, PdlBranch branch) {
  detail::active().table->pdl_loss_batch_v(delta, log_delta, y, log_y, out, n,
                                           lambda, branch);
}

}  // namespace opd::simd
