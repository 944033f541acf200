#include "opd/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "opd/errors.hpp"
#include "nelder_mead.hpp"

namespace opd {

void SpatialDataset::validate() const {
  const Eigen::Index nn = values.size();
  if (nn < 1) throw std::domain_error("dataset: need at least one observation");
  if (static_cast<Eigen::Index>(locations.size()) != nn)
    throw std::domain_error("dataset: locations/values size mismatch");
  if (covariates.rows() != nn)
    throw std::domain_error("dataset: covariate rows do not match observations");
  if (covariates.cols() > nn)
    throw std::domain_error("dataset: more covariates than observations");
  for (Eigen::Index i = 0; i < nn; ++i)
    if (!(values[i] > 0.0))
      throw std::domain_error("dataset: values must be strictly positive");
  for (std::size_t i = 0; i < locations.size(); ++i)
    for (std::size_t j = i + 1; j < locations.size(); ++j)
      if (same_location(locations[i], locations[j]))
        throw std::domain_error("dataset: duplicate observation locations");
}

void CovarianceParams::validate() const {
  if (!(sigma2_eta >= 0.0) || !(sigma2_xi >= 0.0) || !(sigma2_eps >= 0.0))
    throw std::domain_error("covariance: variances must be nonnegative");
  if (!(range_r > 0.0)) throw std::domain_error("covariance: range must be positive");
}

namespace variogram {

double estimate_measurement_error(const DuplicatePairs& dup) {
  if (dup.pairs.empty())
    throw std::domain_error("measurement-error MLE: no duplicate pairs");
  double s = 0.0;
  for (const auto& [z1, z2] : dup.pairs) {
    if (!(z1 > 0.0) || !(z2 > 0.0))
      throw std::domain_error("measurement-error MLE: nonpositive measurement");
    const double d = std::log(z1) - std::log(z2);
    s += d * d;
  }
  return s / (2.0 * static_cast<double>(dup.pairs.size()));
}

double spherical_cov(double h, double sigma2, double r) {
  if (h < 0.0) throw std::domain_error("spherical_cov: negative distance");
  if (h > r) return 0.0;
  const double u = h / r;
  return sigma2 * (1.0 - 1.5 * u + 0.5 * u * u * u);
}

double spherical_semivariogram(double h, double nugget, double partial_sill,
                               double range) {
  if (h <= 0.0) return 0.0;
  if (h > range) return nugget + partial_sill;
  const double u = h / range;
  return nugget + partial_sill * (1.5 * u - 0.5 * u * u * u);
}

EmpiricalSemivariogram robust_semivariogram(const std::vector<double>& residuals,
                                            const std::vector<Point>& locations,
                                            const BinSpec& spec) {
  const std::size_t n = residuals.size();
  if (n != locations.size())
    throw std::domain_error("semivariogram: residual/location size mismatch");
  if (n < 2) throw std::domain_error("semivariogram: need at least two points");
  if (spec.num_bins < 1) throw std::domain_error("semivariogram: need >= 1 bin");

  double max_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      max_dist = std::max(max_dist, distance(locations[i], locations[j]));
  if (!(max_dist > 0.0))
    throw EstimationError("semivariogram: all points coincide");

  const double max_lag = max_dist * spec.max_lag_fraction;
  const double width = max_lag / spec.num_bins;
  std::vector<double> sum_sqrt(spec.num_bins, 0.0), sum_lag(spec.num_bins, 0.0);
  std::vector<std::size_t> count(spec.num_bins, 0);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double h = distance(locations[i], locations[j]);
      if (h <= 0.0 || h > max_lag) continue;
      int k = std::min(static_cast<int>(h / width), spec.num_bins - 1);
      // bins are (edge_k, edge_{k+1}]; nudge exact left edges up a bin
      if (h <= width * k) k = std::max(0, k - 1);
      sum_sqrt[k] += std::sqrt(std::abs(residuals[i] - residuals[j]));
      sum_lag[k] += h;
      ++count[k];
    }
  }

  EmpiricalSemivariogram out;
  for (int k = 0; k < spec.num_bins; ++k) {
    if (count[k] < std::max<std::size_t>(spec.min_pairs, 1)) continue;
    const double nk = static_cast<double>(count[k]);
    const double mean_root = sum_sqrt[k] / nk;
    const double fourth = mean_root * mean_root * mean_root * mean_root;
    const double two_gamma = fourth / (0.457 + 0.494 / nk);
    out.bins.push_back({sum_lag[k] / nk, 0.5 * two_gamma, count[k]});
  }
  if (out.bins.empty())
    throw EstimationError("semivariogram: no bins retained (too few pairs per bin)");
  return out;
}

SphericalFit fit_spherical_wls(const EmpiricalSemivariogram& emp,
                               double init_partial_sill, double init_range,
                               double init_nugget) {
  if (emp.bins.size() < 3)
    throw EstimationError("semivariogram fit: need at least three bins");

  double max_gamma = 0.0, max_lag = 0.0;
  for (const auto& b : emp.bins) {
    max_gamma = std::max(max_gamma, b.gamma);
    max_lag = std::max(max_lag, b.lag);
  }

  auto objective = [&](const std::vector<double>& p) {
    const double psill = p[0], range = p[1], nugget = p[2];
    double s = 0.0;
    for (const auto& b : emp.bins) {
      const double model = spherical_semivariogram(b.lag, nugget, psill, range);
      if (!(model > 0.0)) return 1e30;
      const double rel = b.gamma / model - 1.0;
      s += static_cast<double>(b.pair_count) * rel * rel;
    }
    // A flat semivariogram leaves (partial sill, range) unidentified: any
    // range below the first lag fits. Break the tie toward the pure-nugget
    // solution; the term is far below the WLS resolution otherwise.
    s += 1e-10 * psill / (psill + nugget + 1e-300);
    return s;
  };

  const std::vector<double> lo = {0.0, 1e-9, 0.0};
  const std::vector<double> hi = {50.0 * max_gamma + 1e-12, 100.0 * max_lag,
                                  50.0 * max_gamma + 1e-12};
  std::vector<double> x = {std::clamp(init_partial_sill, lo[0], hi[0]),
                           std::clamp(init_range, lo[1], hi[1]),
                           std::clamp(init_nugget, lo[2], hi[2])};

  detail::NelderMeadResult best{x, objective(x), 1, false};
  int total_evals = best.evaluations;
  for (int restart = 0; restart < 4; ++restart) {
    auto r = detail::nelder_mead(objective, best.x, lo, hi);
    total_evals += r.evaluations;
    const bool improved = r.fx < best.fx - 1e-15 * (1.0 + std::abs(best.fx));
    if (r.fx <= best.fx) best = r;
    if (!improved && r.converged) break;
  }
  if (!best.converged) {
    std::ostringstream msg;
    msg << "semivariogram fit did not converge; last iterate psill=" << best.x[0]
        << " range=" << best.x[1] << " nugget=" << best.x[2]
        << " objective=" << best.fx;
    throw EstimationError(msg.str());
  }
  return {best.x[0], best.x[1], best.x[2], best.fx, total_evals};
}

Eigen::MatrixXd sigma_ztilde_matrix(const CovarianceParams& theta,
                                    const std::vector<Point>& locations) {
  theta.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd sigma(n, n);
  const double diag = theta.sigma2_eta + theta.sigma2_xi + theta.sigma2_eps;
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma(i, i) = diag;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = spherical_cov(distance(locations[i], locations[j]),
                                     theta.sigma2_eta, theta.range_r);
      sigma(i, j) = c;
      sigma(j, i) = c;
    }
  }
  return sigma;
}

Eigen::VectorXd cov_vector(const CovarianceParams& theta,
                           const std::vector<Point>& locations, Point s0) {
  const Eigen::Index n = static_cast<Eigen::Index>(locations.size());
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = distance(s0, locations[i]);
    c[i] = spherical_cov(h, theta.sigma2_eta, theta.range_r);
    if (same_location(s0, locations[i])) c[i] += theta.sigma2_xi;
  }
  return c;
}

Covariances build_covariances(const CovarianceParams& theta,
                              const std::vector<Point>& locations, Point s0) {
  return {sigma_ztilde_matrix(theta, locations), cov_vector(theta, locations, s0),
          theta.sigma2_w()};
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const Eigen::Index n = a.rows();
  double jitter = 1e-10 * a.trace() / static_cast<double>(n);
  if (!(jitter > 0.0)) jitter = 1e-300;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    Eigen::MatrixXd aj = a + jitter * Eigen::MatrixXd::Identity(n, n);
    llt.compute(aj);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 2.0;
  }
  throw NumericalError("covariance matrix is not positive definite after jitter");
}

Eigen::VectorXd gls_beta(const Eigen::MatrixXd& X, const Eigen::MatrixXd& sigma,
                         const Eigen::VectorXd& rhs) {
  auto llt = cholesky_with_jitter(sigma);
  const Eigen::MatrixXd sinv_x = llt.solve(X);
  const Eigen::MatrixXd xtsx = X.transpose() * sinv_x;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtsx);
  if (!lu.isInvertible())
    throw EstimationError("GLS: X' Sigma^{-1} X is singular");
  return lu.solve(sinv_x.transpose() * rhs);
}

GlsFit iterative_gls_fit(const SpatialDataset& data, double sigma2_eps,
                         const GlsConfig& config) {
  data.validate();
  if (!(sigma2_eps >= 0.0))
    throw std::domain_error("GLS: sigma2_eps must be nonnegative");
  const Eigen::Index n = data.n(), p = data.p();
  if (n <= p) throw std::domain_error("GLS: need n > p");

  const Eigen::VectorXd zt = data.values.array().log();
  const Eigen::MatrixXd& X = data.covariates;

  // OLS start.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) throw EstimationError("GLS: covariate matrix is rank deficient");
  Eigen::VectorXd beta = qr.solve(zt);

  double max_dist = 0.0;
  for (std::size_t i = 0; i < data.locations.size(); ++i)
    for (std::size_t j = i + 1; j < data.locations.size(); ++j)
      max_dist = std::max(max_dist, distance(data.locations[i], data.locations[j]));

  Eigen::VectorXd e = zt - X * beta;

  GlsFit fit;
  bool have_theta = false;
  SphericalFit sph{};
  EmpiricalSemivariogram emp;
  Eigen::MatrixXd xtsx_inv;

  for (int it = 1; it <= config.max_iter; ++it) {
    std::vector<double> resid(e.data(), e.data() + n);
    emp = robust_semivariogram(resid, data.locations, config.bins);

    double init_psill, init_range, init_nugget;
    if (have_theta) {
      init_psill = sph.partial_sill;
      init_range = sph.range;
      init_nugget = sph.nugget;
    } else {
      const double v = (e.array() - e.mean()).square().sum() /
                       static_cast<double>(n - 1);
      init_psill = v / 2.0;
      init_range = max_dist / 3.0;
      init_nugget = v / 2.0;
    }
    sph = fit_spherical_wls(emp, init_psill, init_range, init_nugget);
    have_theta = true;

    CovarianceParams theta;
    theta.sigma2_eta = sph.partial_sill;
    theta.range_r = std::max(sph.range, 1e-9);
    theta.sigma2_xi = std::max(sph.nugget - sigma2_eps, 0.0);
    theta.sigma2_eps = sigma2_eps;
    const double s2w = theta.sigma2_w();

    const Eigen::MatrixXd sigma = sigma_ztilde_matrix(theta, data.locations);
    const double offset = 0.5 * (s2w + sigma2_eps);
    const Eigen::VectorXd rhs = zt.array() + offset;

    auto llt = cholesky_with_jitter(sigma);
    const Eigen::MatrixXd sinv_x = llt.solve(X);
    const Eigen::MatrixXd xtsx = X.transpose() * sinv_x;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtsx);
    if (!lu.isInvertible())
      throw EstimationError("GLS: X' Sigma^{-1} X is singular");
    const Eigen::VectorXd beta_new = lu.solve(sinv_x.transpose() * rhs);

    const double delta = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    e = (zt - X * beta).array() + offset;

    fit.trace.push_back({it, delta, theta.sigma2_eta, theta.range_r, sph.nugget});
    fit.theta = theta;
    fit.iterations = it;

    if (delta < config.tol) {
      fit.converged = true;
      xtsx_inv = lu.inverse();
      break;
    }
    if (it == config.max_iter) {
      std::ostringstream msg;
      msg << "GLS did not converge in " << config.max_iter
          << " iterations; last |delta beta| = " << delta;
      throw EstimationError(msg.str());
    }
  }

  fit.beta = beta;
  fit.beta_cov = xtsx_inv;
  fit.final_semivariogram = emp;
  return fit;
}

}  // namespace variogram
}  // namespace opd
