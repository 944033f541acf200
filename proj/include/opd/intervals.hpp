// Prediction intervals under power-divergence loss: Monte Carlo cut-offs,
// analytic bounds for the quadratic and cubic cases, bisection bounds for
// general lambda, LOOCV coverage, and interval-width lambda selection.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "opd/lognormal.hpp"
#include "opd/loss.hpp"
#include "opd/types.hpp"
#include "opd/variogram.hpp"

namespace opd::intervals {

enum class IntervalKind { conditional, unconditional };

struct Cutoff {
  double value = 0.0;  // loss units
  double alpha = 0.0;
  IntervalKind kind = IntervalKind::conditional;
  std::size_t m_used = 0;
};

struct IntervalBounds {
  double lower = 0.0;
  double upper = 0.0;
  // True when the loss equation has no root below the predictor and the
  // interval is (0, upper].
  bool one_sided = false;
};

// Empirical (1 - alpha) quantile (type-7) of the simulated losses.
double cutoff_from_losses(std::vector<double> losses, double alpha);

// lambda = 1: the loss equation is a quadratic with roots
// delta -+ sqrt(2 delta K).
IntervalBounds bounds_quadratic(double delta, double k_cut);

// lambda = 2: depressed cubic; the three discriminant cases are resolved
// analytically (trigonometric form when all roots are real).
IntervalBounds bounds_cubic(double delta, double k_cut);

// Any finite lambda: bracketed bisection on the loss equation, run on the
// log scale. The upper root always exists; the lower one exists only when
// the y->0 loss limit exceeds the cut-off.
IntervalBounds bounds_general(double delta, double k_cut,
                              loss::PowerParameter lambda);

// Joint replicates behind the unconditional interval: per replicate the
// log process value at s0 and the kriging projection of the simulated data.
// One replicate set serves a whole lambda grid.
struct UnconditionalReplicates {
  lognormal::PredictiveLaw law;
  std::vector<double> w0;  // log process at s0 per replicate
  std::vector<double> t;   // w' (ztilde - E ztilde) per replicate
  double x0_beta = 0.0;
  double sigma2_w = 0.0;
  std::size_t m = 0;
};

// Full joint simulation of (Y(s0), Z) via the model sampler.
UnconditionalReplicates draw_unconditional_replicates(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, std::size_t m, std::uint64_t seed,
    std::uint64_t stream);

// Same law without simulating the n-dimensional data vector: (W(s0), t) is
// exactly bivariate Gaussian with covariance [[s2w, cSc], [cSc, cSc]], so the
// pair can be drawn directly. Used for grid-scale runs.
UnconditionalReplicates draw_unconditional_replicates_reduced(
    const lognormal::PredictiveLaw& law, std::size_t m, std::uint64_t seed,
    std::uint64_t stream);

std::pair<IntervalBounds, Cutoff> unconditional_interval_from(
    const UnconditionalReplicates& reps, loss::PowerParameter lambda,
    double alpha);

struct ConditionalReplicates {
  lognormal::PredictiveLaw law;
  std::vector<double> y;      // draws from [Y(s0) | Z]
  std::vector<double> log_y;  // their logs (exact, from the sampler)
  std::size_t m = 0;
};

ConditionalReplicates draw_conditional_replicates(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, std::size_t m, std::uint64_t seed,
    std::uint64_t stream);

std::pair<IntervalBounds, Cutoff> conditional_interval_from(
    const ConditionalReplicates& reps, loss::PowerParameter lambda, double alpha);

// Unconditional interval: cut-off from joint replicates of (Y(s0), Z), with
// the predictor refitted (same plug-in parameters) on each simulated data
// vector; bounds around the actual-data predictor.
std::pair<IntervalBounds, Cutoff> unconditional_interval(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, loss::PowerParameter lambda, double alpha,
    std::size_t m, std::uint64_t seed, std::uint64_t stream);

// Conditional interval: cut-off from draws of [Y(s0) | Z].
std::pair<IntervalBounds, Cutoff> conditional_interval(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, loss::PowerParameter lambda, double alpha,
    std::size_t m, std::uint64_t seed, std::uint64_t stream);

struct LoocvOptions {
  double alpha = 0.05;
  IntervalKind kind = IntervalKind::unconditional;
  std::size_t m = 100000;
  std::uint64_t seed = 0;
  // When set, beta and theta are re-estimated on each leave-one-out subset
  // (slow); by default the full-data plug-in estimates are held fixed.
  std::optional<variogram::GlsConfig> refit;
  double refit_sigma2_eps = 0.0;
};

struct LoocvResult {
  std::vector<double> coverage;            // one per lambda
  std::vector<std::vector<bool>> per_site;  // [lambda][site]
};

// Leave-one-out coverage of the (1-alpha) interval for the process value,
// tested against the held-out datum, over a grid of lambda values. Draws are
// shared across the lambda grid per site (per-site substreams).
LoocvResult loocv_coverage_grid(const SpatialDataset& data,
                                const ModelParams& params,
                                const std::vector<double>& lambdas,
                                const LoocvOptions& options);

// Single-lambda convenience wrapper.
std::pair<double, std::vector<bool>> loocv_coverage(
    const SpatialDataset& data, const ModelParams& params, double lambda,
    const LoocvOptions& options);

struct WidthSelection {
  double lambda_star = 0.0;            // median of per-location minimisers
  std::vector<double> per_location;    // minimiser at each location
};

// Per location, the lambda in the grid minimising the unconditional interval
// width (ties -> smaller |lambda|); returns the lower median across
// locations.
WidthSelection select_lambda_by_width(
    const lognormal::LogGaussianModel& model, const std::vector<Point>& locations,
    const std::vector<Eigen::VectorXd>& x0s, const std::vector<double>& lambda_grid,
    double alpha, std::size_t m, std::uint64_t seed);

}  // namespace opd::intervals
