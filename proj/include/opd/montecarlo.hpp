// Distribution-agnostic OPD estimation from predictive samples, delta-method
// approximations, block prediction, and the exact samplers for the
// log-Gaussian model (predictive and joint).
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "opd/lognormal.hpp"
#include "opd/loss.hpp"
#include "opd/types.hpp"

namespace opd::montecarlo {

struct PredictiveSamples {
  std::vector<double> draws;  // strictly positive
  std::uint64_t seed = 0;
  enum class Source { conditional, joint } source = Source::conditional;
};

// Monte Carlo estimate of the OPD predictor from predictive draws:
// (mean of y^{lambda+1})^{1/(lambda+1)}, or the geometric mean at lambda = -1.
// Powers are accumulated in log space (shifted by the max exponent).
double opd_estimate(const PredictiveSamples& samples, loss::PowerParameter lambda);

// Delta-method variance of the estimator above; needs at least two draws.
double opd_estimator_variance(const PredictiveSamples& samples,
                              loss::PowerParameter lambda);

// Second-order delta-method approximation of the OPD predictor from the
// predictive mean and variance: mean * (1 + l CV^2/2 - l^3 CV^4/8).
// Throws NumericalError when the multiplicative factor is nonpositive
// (approximation breakdown) rather than clamping.
double delta_method_predictor(double mean, double variance,
                              loss::PowerParameter lambda);

// Second-order approximation of the fractional moment E(Y^{lambda+1}):
// mean^{lambda+1} (1 + lambda (lambda+1) CV^2 / 2). Not defined at lambda=-1.
double delta_method_fractional_moment(double mean, double variance,
                                      loss::PowerParameter lambda);

// Quadrature over a block: points and normalized positive weights.
struct BlockSpec {
  std::vector<Point> quadrature_points;
  std::vector<double> weights;
  void validate() const;  // weights sum to 1 within 1e-12, >= 1 point
};

// Weighted average of pointwise OPD predictors: the minimiser of the
// block-averaged loss.
double block_predict_average(const std::vector<double>& pointwise,
                             const BlockSpec& block);

// Delta-method block predictor from the block-predictive moments (computed by
// the caller from point-level means and covariances).
double block_predict_delta(double block_mean, double block_variance,
                           loss::PowerParameter lambda);

// M lognormal draws from the predictive law: exp(mu + sqrt(v) * eps).
// (seed, stream) address an independent Philox substream.
PredictiveSamples sample_predictive(const lognormal::PredictiveLaw& law,
                                    std::size_t m, std::uint64_t seed,
                                    std::uint64_t stream);

// Joint draws of (Y(s0), Z): the latent field at s0 and all data sites plus
// i.i.d. lognormal measurement error at the data sites. Column m of z holds
// the m-th replicate.
struct JointSamples {
  Eigen::VectorXd y0;  // M
  Eigen::MatrixXd z;   // n x M
  std::uint64_t seed = 0;
};
JointSamples sample_joint(const lognormal::LogGaussianModel& model, Point s0,
                          const Eigen::VectorXd& x0, std::size_t m,
                          std::uint64_t seed, std::uint64_t stream);

namespace detail {
// Chunked driver behind sample_joint and the unconditional interval: streams
// log-scale replicates (w0_m, t_m = w' (ztilde_m - E ztilde)) through `sink`
// without materializing the n x M matrix. Draw order is fixed (chunks of
// kJointChunk columns), so results are seed-deterministic.
inline constexpr std::size_t kJointChunk = 4096;
void joint_log_draws(const lognormal::LogGaussianModel& model, Point s0,
                     double x0_beta, std::size_t m, std::uint64_t seed,
                     std::uint64_t stream, const Eigen::VectorXd* proj_w,
                     std::vector<double>* w0_out, std::vector<double>* t_out,
                     Eigen::MatrixXd* ztilde_out);
}  // namespace detail

}  // namespace opd::montecarlo
