#include "opd/montecarlo.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "opd/errors.hpp"
#include "opd/rng.hpp"
#include "opd/simd.hpp"
#include "opd/stats.hpp"
#include "opd/variogram.hpp"

namespace opd::montecarlo {

using loss::PowerParameter;
using simd::PdlBranch;

namespace {

void require_draws(const PredictiveSamples& s, std::size_t min_m) {
  if (s.draws.size() < min_m)
    throw std::domain_error("Monte Carlo estimator: not enough draws");
  for (double d : s.draws)
    if (!(d > 0.0)) throw std::domain_error("Monte Carlo estimator: nonpositive draw");
}

double checked_exp(double log_value, const char* what) {
  if (log_value > 709.782712893383996843) {
    std::ostringstream msg;
    msg << what << " overflows: log-scale value " << log_value
        << " (power sums are already accumulated in log space)";
    throw NumericalError(msg.str());
  }
  return std::exp(log_value);
}

}  // namespace

double opd_estimate(const PredictiveSamples& samples, PowerParameter lambda) {
  require_draws(samples, 1);
  const std::size_t m = samples.draws.size();
  std::vector<double> logs(m);
  simd::vlog(samples.draws.data(), logs.data(), m);

  if (loss::branch_of(lambda.lambda) == PdlBranch::neg_one)
    return checked_exp(simd::sum(logs.data(), m) / static_cast<double>(m),
                       "OPD estimate");

  const double a = lambda.lambda + 1.0;
  double mn, mx;
  simd::minmax(logs.data(), m, mn, mx);
  const double shift = a >= 0.0 ? a * mx : a * mn;  // max of a*log y
  const double s = simd::sum_exp_affine(logs.data(), m, a, -shift);
  const double log_mean_pow =
      std::log(s / static_cast<double>(m)) + shift;  // log mean(y^a)
  return checked_exp(log_mean_pow / a, "OPD estimate");
}

double opd_estimator_variance(const PredictiveSamples& samples,
                              PowerParameter lambda) {
  require_draws(samples, 2);
  const std::size_t m = samples.draws.size();
  const double md = static_cast<double>(m);
  std::vector<double> logs(m);
  simd::vlog(samples.draws.data(), logs.data(), m);

  if (loss::branch_of(lambda.lambda) == PdlBranch::neg_one) {
    const double mean_log = simd::sum(logs.data(), m) / md;
    return std::exp(2.0 * mean_log) * stats::variance(logs.data(), m) / md;
  }

  const double a = lambda.lambda + 1.0;
  double mn, mx;
  simd::minmax(logs.data(), m, mn, mx);
  const double shift = a >= 0.0 ? a * mx : a * mn;
  std::vector<double> pw(m);
  simd::exp_affine(logs.data(), pw.data(), m, a, -shift);  // y^a / e^{shift}
  const double mean_shifted = simd::sum(pw.data(), m) / md;
  const double var_shifted = stats::variance(pw.data(), m);
  const double log_delta = (std::log(mean_shifted) + shift) / a;
  // var(delta_hat) ~ M^-1 (a)^-2 delta^{-2 lambda} var(y^a); undo the shift
  // in log space so large powers cannot overflow intermediates.
  const double log_scale = 2.0 * shift - 2.0 * lambda.lambda * log_delta;
  return var_shifted * checked_exp(log_scale, "estimator variance") /
         (a * a * md);
}

double delta_method_predictor(double mean, double variance,
                              PowerParameter lambda) {
  if (!(mean > 0.0))
    throw std::domain_error("delta method: mean must be positive");
  if (!(variance >= 0.0))
    throw std::domain_error("delta method: variance must be nonnegative");
  const double l = lambda.lambda;
  const double cv2 = variance / (mean * mean);
  const double factor = 1.0 + 0.5 * l * cv2 - 0.125 * l * l * l * cv2 * cv2;
  if (!(factor > 0.0)) {
    std::ostringstream msg;
    msg << "delta-method approximation breaks down: factor " << factor
        << " at lambda " << l << ", CV^2 " << cv2;
    throw NumericalError(msg.str());
  }
  return mean * factor;
}

double delta_method_fractional_moment(double mean, double variance,
                                      PowerParameter lambda) {
  if (!(mean > 0.0))
    throw std::domain_error("delta method: mean must be positive");
  if (loss::branch_of(lambda.lambda) == PdlBranch::neg_one)
    throw std::domain_error(
        "delta-method fractional moment is undefined at lambda = -1");
  const double l = lambda.lambda;
  const double cv2 = variance / (mean * mean);
  return std::pow(mean, l + 1.0) * (1.0 + 0.5 * l * (l + 1.0) * cv2);
}

void BlockSpec::validate() const {
  if (quadrature_points.empty())
    throw std::domain_error("block: need at least one quadrature point");
  if (weights.size() != quadrature_points.size())
    throw std::domain_error("block: weights/points size mismatch");
  double s = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::domain_error("block: weights must be positive");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12)
    throw std::domain_error("block: weights must sum to 1");
}

double block_predict_average(const std::vector<double>& pointwise,
                             const BlockSpec& block) {
  block.validate();
  if (pointwise.size() != block.weights.size())
    throw std::domain_error("block: pointwise predictor count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pointwise.size(); ++i)
    s += block.weights[i] * pointwise[i];
  return s;
}

double block_predict_delta(double block_mean, double block_variance,
                           PowerParameter lambda) {
  return delta_method_predictor(block_mean, block_variance, lambda);
}

PredictiveSamples sample_predictive(const lognormal::PredictiveLaw& law,
                                    std::size_t m, std::uint64_t seed,
                                    std::uint64_t stream) {
  if (m < 1) throw std::domain_error("sample_predictive: need m >= 1");
  PredictiveSamples out;
  out.seed = seed;
  out.source = PredictiveSamples::Source::conditional;
  out.draws.resize(m);
  std::vector<double> eps(m);
  PhiloxStream rng(seed, stream);
  rng.fill_normal(eps.data(), m);
  simd::exp_affine(eps.data(), out.draws.data(), m, std::sqrt(law.v), law.mu);
  return out;
}

namespace detail {

void joint_log_draws(const lognormal::LogGaussianModel& model, Point s0,
                     double x0_beta, std::size_t m, std::uint64_t seed,
                     std::uint64_t stream, const Eigen::VectorXd* proj_w,
                     std::vector<double>* w0_out, std::vector<double>* t_out,
                     Eigen::MatrixXd* ztilde_out) {
  const auto& theta = model.params().theta;
  const Eigen::Index n = model.data().n();

  // Joint covariance of (W(s0), W(s_1..n)); microscale included everywhere.
  Eigen::MatrixXd joint(n + 1, n + 1);
  joint(0, 0) = theta.sigma2_w();
  const Eigen::VectorXd c =
      variogram::cov_vector(theta, model.data().locations, s0);
  joint.block(1, 0, n, 1) = c;
  joint.block(0, 1, 1, n) = c.transpose();
  {
    Eigen::MatrixXd sw =
        variogram::sigma_ztilde_matrix(theta, model.data().locations);
    sw.diagonal().array() -= theta.sigma2_eps;  // process-only covariance
    joint.block(1, 1, n, n) = sw;
  }
  const Eigen::MatrixXd l_joint =
      variogram::cholesky_with_jitter(joint).matrixL();

  const double mean_w0 = x0_beta - 0.5 * theta.sigma2_w();
  const Eigen::VectorXd mean_w =
      (model.data().covariates * model.params().beta).array() -
      0.5 * theta.sigma2_w();
  const double eps_mean = -0.5 * theta.sigma2_eps;
  const double eps_sd = std::sqrt(theta.sigma2_eps);

  if (w0_out) w0_out->resize(m);
  if (t_out) t_out->resize(m);
  if (ztilde_out) ztilde_out->resize(n, static_cast<Eigen::Index>(m));

  PhiloxStream rng(seed, stream);
  Eigen::MatrixXd e(n + 1, kJointChunk);
  Eigen::MatrixXd g(n + 1, kJointChunk);
  std::vector<double> eps_buf(static_cast<std::size_t>(n) * kJointChunk);

  std::size_t done = 0;
  while (done < m) {
    const std::size_t cols = std::min(kJointChunk, m - done);
    rng.fill_normal(e.data(), static_cast<std::size_t>(n + 1) * cols);
    rng.fill_normal(eps_buf.data(), static_cast<std::size_t>(n) * cols);

    g.leftCols(cols).noalias() =
        l_joint * e.leftCols(static_cast<Eigen::Index>(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      auto col = g.col(static_cast<Eigen::Index>(j));
      col(0) += mean_w0;
      col.tail(n) += mean_w;
      for (Eigen::Index i = 0; i < n; ++i)
        col(i + 1) += eps_mean + eps_sd * eps_buf[j * n + i];
      if (w0_out) (*w0_out)[done + j] = col(0);
      if (t_out)
        (*t_out)[done + j] =
            proj_w->dot(col.tail(n) - model.mean_log_data());
      if (ztilde_out)
        ztilde_out->col(static_cast<Eigen::Index>(done + j)) = col.tail(n);
    }
    done += cols;
  }
}

}  // namespace detail

JointSamples sample_joint(const lognormal::LogGaussianModel& model, Point s0,
                          const Eigen::VectorXd& x0, std::size_t m,
                          std::uint64_t seed, std::uint64_t stream) {
  if (m < 1) throw std::domain_error("sample_joint: need m >= 1");
  if (x0.size() != model.params().beta.size())
    throw std::domain_error("sample_joint: covariate vector length mismatch");
  JointSamples out;
  out.seed = seed;
  std::vector<double> w0;
  Eigen::MatrixXd ztilde;
  detail::joint_log_draws(model, s0, x0.dot(model.params().beta), m, seed,
                          stream, nullptr, &w0, nullptr, &ztilde);
  out.y0.resize(static_cast<Eigen::Index>(m));
  simd::vexp(w0.data(), out.y0.data(), m);
  out.z.resize(ztilde.rows(), ztilde.cols());
  simd::vexp(ztilde.data(), out.z.data(),
             static_cast<std::size_t>(ztilde.size()));
  return out;
}

}  // namespace opd::montecarlo
