#include "opd/lognormal.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "opd/errors.hpp"
#include "opd/stats.hpp"
#include "opd/variogram.hpp"

namespace opd::lognormal {

namespace {

// Guarded exponential: values above the overflow threshold are an error the
// caller should see, not an inf that propagates silently.
double exp_checked(double log_value, const char* what) {
  if (log_value > 709.782712893383996843) {
    std::ostringstream msg;
    msg << what << " overflows: log-scale value " << log_value;
    throw NumericalError(msg.str());
  }
  return std::exp(log_value);
}

using loss::PowerParameter;
using simd::PdlBranch;

}  // namespace

LogGaussianModel::LogGaussianModel(SpatialDataset data, ModelParams params)
    : data_(std::move(data)), params_(std::move(params)) {
  data_.validate();
  params_.theta.validate();
  if (params_.beta.size() != data_.p())
    throw std::domain_error("model: beta length does not match covariates");
  llt_ = variogram::cholesky_with_jitter(
      variogram::sigma_ztilde_matrix(params_.theta, data_.locations));
  const double offset = 0.5 * (params_.theta.sigma2_w() + params_.theta.sigma2_eps);
  mean_ztilde_ = (data_.covariates * params_.beta).array() - offset;
  centered_ = data_.values.array().log() - mean_ztilde_.array();
}

LogGaussianModel::Projection LogGaussianModel::projection(Point s0) const {
  Projection proj;
  const Eigen::VectorXd c = variogram::cov_vector(params_.theta, data_.locations, s0);
  proj.w = llt_.solve(c);
  proj.cSc = std::max(c.dot(proj.w), 0.0);
  proj.w_dot_centered = proj.w.dot(centered_);
  return proj;
}

PredictiveLaw LogGaussianModel::law_from_projection(const Projection& proj,
                                                    double x0_beta) const {
  PredictiveLaw law;
  const double s2w = sigma2_w();
  law.x0_beta = x0_beta;
  law.cSc = std::min(proj.cSc, s2w);
  law.mu = x0_beta - 0.5 * s2w + proj.w_dot_centered;
  law.v = std::max(s2w - proj.cSc, 0.0);
  return law;
}

PredictiveLaw LogGaussianModel::predictive_law(Point s0,
                                               const Eigen::VectorXd& x0) const {
  if (x0.size() != params_.beta.size())
    throw std::domain_error("predictive_law: covariate vector length mismatch");
  return law_from_projection(projection(s0), x0.dot(params_.beta));
}

double opd_predict(const PredictiveLaw& law, PowerParameter lambda) {
  return exp_checked(law.mu + 0.5 * (lambda.lambda + 1.0) * law.v, "OPD predictor");
}

PredictorMoments predictor_moments(const PredictiveLaw& law, PowerParameter lambda) {
  const double l = lambda.lambda;
  PredictorMoments m;
  m.log_mean = law.x0_beta - 0.5 * law.cSc + 0.5 * l * law.v;
  m.log_var = law.cSc;
  m.mean = exp_checked(law.x0_beta + 0.5 * l * law.v, "predictor mean");
  m.variance = exp_checked(2.0 * law.x0_beta + l * law.v, "predictor variance") *
               std::expm1(law.cSc);
  return m;
}

double bias(const PredictiveLaw& law, PowerParameter lambda) {
  return exp_checked(law.x0_beta, "bias") * std::expm1(0.5 * lambda.lambda * law.v);
}

double mspe(const PredictiveLaw& law, PowerParameter lambda) {
  const double l = lambda.lambda;
  const double s2w = law.sigma2_w();
  const double scale = exp_checked(2.0 * law.x0_beta, "MSPE");
  return scale * (std::exp(s2w) - 2.0 * std::exp(law.cSc + 0.5 * l * law.v) +
                  std::exp(law.cSc + l * law.v));
}

double rmspe(const PredictiveLaw& law, PowerParameter lambda) {
  return std::sqrt(std::max(mspe(law, lambda), 0.0));
}

double elp_min(const PredictiveLaw& law, PowerParameter lambda) {
  const double l = lambda.lambda;
  const double base = exp_checked(law.mu + 0.5 * law.v, "minimised ELP");
  if (loss::branch_of(l) == PdlBranch::zero) return 0.5 * law.v * base;
  return base * std::expm1(0.5 * l * law.v) / l;
}

double elj_min(const PredictiveLaw& law, PowerParameter lambda) {
  const double l = lambda.lambda;
  const double base = exp_checked(law.x0_beta, "minimised ELJ");
  if (loss::branch_of(l) == PdlBranch::zero) return 0.5 * law.v * base;
  return base * std::expm1(0.5 * l * law.v) / l;
}

double quantile(const PredictiveLaw& law, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error("quantile: q must lie in (0,1)");
  return exp_checked(law.mu + std::sqrt(law.v) * stats::norm_quantile(q),
                     "predictive quantile");
}

double calibrate_lambda(const PredictiveLaw& law, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error("calibrate_lambda: q must lie in (0,1)");
  if (!(law.v > 0.0))
    throw EstimationError(
        "calibrate_lambda: degenerate predictive law (v = 0) has no quantile map");
  return 2.0 * stats::norm_quantile(q) / std::sqrt(law.v) - 1.0;
}

}  // namespace opd::lognormal
