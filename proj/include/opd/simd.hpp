// Batch math kernels for the Monte Carlo hot loops: elementwise exp/log,
// lognormal transforms, power-divergence losses over draw vectors, and the
// reductions behind the power-mean estimators.
//
// Two implementations exist: a scalar reference and an AVX2 variant compiled
// into its own translation unit. The active lane is picked once at startup
// from CPUID (override with OPD_SIMD=scalar|avx2 or force_lane()). Elementwise
// kernels produce bit-identical results in both lanes; reductions may differ
// in the last few ulps because of accumulation order.
#pragma once

#include <cstddef>
#include <string>

namespace opd::simd {

enum class Lane { scalar, avx2 };

// Lane selected for this process (CPUID + OPD_SIMD override).
Lane active_lane();
const char* lane_name(Lane lane);

// Test hook. Throws std::runtime_error if the lane is unsupported on this CPU.
void force_lane(Lane lane);
bool lane_supported(Lane lane);

// out[i] = exp(x[i]).  Saturates to 0 / +inf outside [-708.396, 709.783].
void vexp(const double* x, double* out, std::size_t n);

// out[i] = log(x[i]); x <= 0 gives -inf (x == 0) or NaN (x < 0).
void vlog(const double* x, double* out, std::size_t n);

// out[i] = exp(a * x[i] + b); the lognormal sampling transform.
void exp_affine(const double* x, double* out, std::size_t n, double a, double b);

double sum(const double* x, std::size_t n);
void minmax(const double* x, std::size_t n, double& mn, double& mx);

// sum_i exp(a * x[i] + b); the shifted power-sum behind the OPD estimator.
double sum_exp_affine(const double* x, std::size_t n, double a, double b);

// Which analytic branch of the power-divergence loss to evaluate.
enum class PdlBranch { general, zero, neg_one };

// out[i] = PDL(delta, y[i]); log_y[i] must equal log(y[i]) (callers reuse the
// log vector across lambda values).
void pdl_loss_batch(double delta, double log_delta, const double* y,
                    const double* log_y, double* out, std::size_t n,
                    double lambda, PdlBranch branch);

// Same with a per-element predictor: out[i] = PDL(delta[i], y[i]).
void pdl_loss_batch_v(const double* delta, const double* log_delta,
                      const double* y, const double* log_y, double* out,
                      std::size_t n, double lambda, PdlBranch branch);

}  // namespace opd::simd
