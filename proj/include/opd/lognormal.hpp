// Closed-form inference for the log-Gaussian spatial model: the predictive
// law at a location, the optimal power-divergence predictor, its sampling
// moments, bias, MSPE, minimised expected losses, and quantile calibration.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "opd/loss.hpp"
#include "opd/types.hpp"

namespace opd::lognormal {

// Log-scale conditional law of the process at a prediction location, together
// with the pieces the uncertainty formulas reuse.
struct PredictiveLaw {
  double mu = 0.0;       // E(W(s0) | log data)
  double v = 0.0;        // var(W(s0) | log data), clamped at 0
  double x0_beta = 0.0;  // x(s0)' beta
  double cSc = 0.0;      // c(s0)' Sigma^{-1} c(s0)

  double sigma2_w() const { return v + cSc; }
};

// Immutable fitted model: data, plug-in parameters, and the precomputed
// Cholesky of the data covariance plus the centered log data.
class LogGaussianModel {
 public:
  LogGaussianModel(SpatialDataset data, ModelParams params);

  const SpatialDataset& data() const { return data_; }
  const ModelParams& params() const { return params_; }
  double sigma2_w() const { return params_.theta.sigma2_w(); }
  const Eigen::VectorXd& centered_log_data() const { return centered_; }
  const Eigen::VectorXd& mean_log_data() const { return mean_ztilde_; }
  const Eigen::LLT<Eigen::MatrixXd>& chol() const { return llt_; }

  // Kriging weights w = Sigma^{-1} c(s0) and the quadratic form they induce.
  struct Projection {
    Eigen::VectorXd w;
    double cSc = 0.0;
    double w_dot_centered = 0.0;
  };
  Projection projection(Point s0) const;

  // x0 is the covariate vector at s0 (same layout as the fit).
  PredictiveLaw predictive_law(Point s0, const Eigen::VectorXd& x0) const;
  PredictiveLaw law_from_projection(const Projection& proj, double x0_beta) const;

 private:
  SpatialDataset data_;
  ModelParams params_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd mean_ztilde_;  // X beta - 0.5 (sigma2_W + sigma2_eps) 1
  Eigen::VectorXd centered_;     // log values - mean
};

// exp{mu + 0.5 (lambda + 1) v}: the optimal predictor under power-divergence
// loss; lambda = -1 gives the predictive median, lambda = 0 the mean.
double opd_predict(const PredictiveLaw& law, loss::PowerParameter lambda);

// The predictor is itself lognormal over repeated sampling of the data.
struct PredictorMoments {
  double mean = 0.0;
  double variance = 0.0;
  double log_mean = 0.0;
  double log_var = 0.0;
};
PredictorMoments predictor_moments(const PredictiveLaw& law, loss::PowerParameter lambda);

// E(predictor - process): zero at lambda = 0, sign(lambda) otherwise.
double bias(const PredictiveLaw& law, loss::PowerParameter lambda);

double mspe(const PredictiveLaw& law, loss::PowerParameter lambda);
double rmspe(const PredictiveLaw& law, loss::PowerParameter lambda);

// Minimised expected loss under the predictive distribution (data-dependent
// through mu) and under the joint distribution.
double elp_min(const PredictiveLaw& law, loss::PowerParameter lambda);
double elj_min(const PredictiveLaw& law, loss::PowerParameter lambda);

// Lognormal quantile of the predictive law.
double quantile(const PredictiveLaw& law, double q);

// Power parameter making the OPD predictor hit the q-th predictive quantile:
// 2 Phi^{-1}(q)/sqrt(v) - 1. Throws EstimationError when v = 0.
double calibrate_lambda(const PredictiveLaw& law, double q);

}  // namespace opd::lognormal
