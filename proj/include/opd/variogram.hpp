// Parameter estimation for the log-Gaussian spatial model: measurement-error
// MLE from duplicate pairs, robust empirical semivariogram, weighted
// least-squares spherical fit, and the iterated GLS loop for (beta, theta).
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "opd/types.hpp"

namespace opd::variogram {

// MLE of the log-scale measurement-error variance from replicated pairs:
// (1/2P) sum_p (log z_p1 - log z_p2)^2.
double estimate_measurement_error(const DuplicatePairs& pairs);

// Isotropic spherical covariance, compactly supported on [0, r]:
// sigma2 * (1 - 1.5 h/r + 0.5 (h/r)^3) for h <= r, else 0.
double spherical_cov(double h, double sigma2, double r);

// Matching semivariogram of the spherical-plus-nugget model, gamma(0) = 0.
double spherical_semivariogram(double h, double nugget, double partial_sill,
                               double range);

struct SemivariogramBin {
  double lag = 0.0;            // mean pair distance in the bin
  double gamma = 0.0;          // robust estimate of gamma(lag)
  std::size_t pair_count = 0;
};

struct EmpiricalSemivariogram {
  std::vector<SemivariogramBin> bins;
};

struct BinSpec {
  int num_bins = 15;
  double max_lag_fraction = 0.5;  // of the maximum pairwise distance
  std::size_t min_pairs = 30;     // bins with fewer pairs are dropped
};

// Cressie-Hawkins robust estimator on residuals:
// 2*gamma(h) = (mean |e_i - e_j|^{1/2})^4 / (0.457 + 0.494/|N(h)|) per bin.
EmpiricalSemivariogram robust_semivariogram(const std::vector<double>& residuals,
                                            const std::vector<Point>& locations,
                                            const BinSpec& spec = {});

struct SphericalFit {
  double partial_sill = 0.0;
  double range = 1.0;
  double nugget = 0.0;
  double objective = 0.0;
  int evaluations = 0;
};

// Weighted least squares with Cressie weights: minimizes
// sum_bins |N(h)| (gamma_hat/gamma_model - 1)^2 over (partial sill, range,
// nugget) under nonnegativity, started from init.
SphericalFit fit_spherical_wls(const EmpiricalSemivariogram& emp,
                               double init_partial_sill, double init_range,
                               double init_nugget);

struct GlsConfig {
  double tol = 1e-6;  // max elementwise |delta beta| stopping rule
  int max_iter = 50;
  BinSpec bins;
};

struct GlsIterationRecord {
  int iteration = 0;
  double delta_beta = 0.0;
  double sigma2_eta = 0.0;
  double range = 0.0;
  double nugget = 0.0;
};

struct GlsFit {
  Eigen::VectorXd beta;
  CovarianceParams theta;
  Eigen::MatrixXd beta_cov;  // (X' Sigma^{-1} X)^{-1}
  std::vector<GlsIterationRecord> trace;
  EmpiricalSemivariogram final_semivariogram;
  int iterations = 0;
  bool converged = false;
};

// OLS start, then alternate: residual semivariogram -> WLS spherical fit ->
// GLS coefficient update with the lognormal mean offset, until the beta
// update falls below tol. sigma2_eps is supplied (estimated from duplicates
// or known). Throws EstimationError on rank failure or non-convergence.
GlsFit iterative_gls_fit(const SpatialDataset& data, double sigma2_eps,
                         const GlsConfig& config = {});

// One GLS solve: beta = (X' Sigma^{-1} X)^{-1} X' Sigma^{-1} rhs.
Eigen::VectorXd gls_beta(const Eigen::MatrixXd& X, const Eigen::MatrixXd& sigma,
                         const Eigen::VectorXd& rhs);

// Data covariance Sigma_Ztilde = Sigma_eta + (sigma2_xi + sigma2_eps) I.
Eigen::MatrixXd sigma_ztilde_matrix(const CovarianceParams& theta,
                                    const std::vector<Point>& locations);

// c(s0)_i = C_eta(||s0 - s_i||) + sigma2_xi * I(s0 == s_i): covariance of the
// latent log process at s0 with each observation's log process value.
Eigen::VectorXd cov_vector(const CovarianceParams& theta,
                           const std::vector<Point>& locations, Point s0);

struct Covariances {
  Eigen::MatrixXd sigma_ztilde;
  Eigen::VectorXd c;
  double sigma2_w = 0.0;
};

Covariances build_covariances(const CovarianceParams& theta,
                              const std::vector<Point>& locations, Point s0);

// Cholesky with the jitter policy: on failure add 1e-10 * trace/n to the
// diagonal, doubling up to 8 times; throws NumericalError if still not SPD.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a);

}  // namespace opd::variogram
