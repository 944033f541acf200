#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace opd {

// Planar coordinates (projected map units, e.g. meters).
struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline bool same_location(Point a, Point b) { return a.x == b.x && a.y == b.y; }

// Observations of a positive-valued process with covariates.
struct SpatialDataset {
  std::vector<Point> locations;
  Eigen::VectorXd values;      // strictly positive, process units
  Eigen::MatrixXd covariates;  // n x p; first column is usually the intercept
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return values.size(); }
  Eigen::Index p() const { return covariates.cols(); }

  // Enforces: n >= 1, positive values, matching sizes, p <= n, and pairwise
  // distinct locations. Throws std::domain_error.
  void validate() const;
};

// Replicated measurement pairs used to estimate the measurement-error
// variance on the log scale.
struct DuplicatePairs {
  std::vector<std::pair<double, double>> pairs;
};

// Covariance parameters of the log-scale process: spherical partial sill and
// range for the smooth component, microscale (non-smooth) variance, and the
// measurement-error variance.
struct CovarianceParams {
  double sigma2_eta = 0.0;
  double range_r = 1.0;
  double sigma2_xi = 0.0;
  double sigma2_eps = 0.0;

  double sigma2_w() const { return sigma2_eta + sigma2_xi; }
  // Throws std::domain_error on negative variances or nonpositive range.
  void validate() const;
};

struct ModelParams {
  Eigen::VectorXd beta;
  CovarianceParams theta;
};

}  // namespace opd
