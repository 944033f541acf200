#include "opd/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "opd/errors.hpp"
#include "opd/montecarlo.hpp"
#include "opd/parallel.hpp"
#include "opd/rng.hpp"
#include "opd/simd.hpp"
#include "opd/stats.hpp"

namespace opd::intervals {

using loss::PowerParameter;
using simd::PdlBranch;

double cutoff_from_losses(std::vector<double> losses, double alpha) {
  if (losses.empty()) throw std::domain_error("cutoff: empty loss vector");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("cutoff: alpha must lie in (0,1)");
  return stats::quantile_type7(std::move(losses), 1.0 - alpha);
}

namespace {

void require_delta_k(double delta, double k_cut) {
  if (!(delta > 0.0)) throw std::domain_error("bounds: predictor must be positive");
  if (!(k_cut > 0.0)) throw std::domain_error("bounds: cut-off must be positive");
}

// One Newton step on the lambda = 2 cubic keeps the analytic roots at full
// double precision.
double polish_cubic_root(double y, double delta, double k_cut) {
  const double d2 = delta * delta;
  const double p = y * y * y - 3.0 * d2 * y - 2.0 * d2 * (3.0 * k_cut - delta);
  const double dp = 3.0 * (y * y - d2);
  if (dp != 0.0 && std::isfinite(p / dp)) y -= p / dp;
  return y;
}

}  // namespace

IntervalBounds bounds_quadratic(double delta, double k_cut) {
  require_delta_k(delta, k_cut);
  const double s = std::sqrt(2.0 * delta * k_cut);
  const double lower = delta - s;
  return {std::max(0.0, lower), delta + s, lower <= 0.0};
}

IntervalBounds bounds_cubic(double delta, double k_cut) {
  require_delta_k(delta, k_cut);
  const double t = 2.0 * delta - 3.0 * k_cut;  // sign of the discriminant
  if (t == 0.0) return {0.0, 3.0 * k_cut, true};
  if (t < 0.0) {
    // One real root: Cardano on the depressed cubic.
    const double s = std::sqrt(9.0 * k_cut * k_cut - 6.0 * delta * k_cut);
    const double a = std::cbrt(delta * delta * (3.0 * k_cut - delta + s));
    double upper = a + delta * delta / a;
    upper = polish_cubic_root(upper, delta, k_cut);
    return {0.0, upper, true};
  }
  // Three real roots: trigonometric form, roots 2 delta cos(theta/3 - 2 pi k/3).
  const double arg = std::clamp(3.0 * k_cut / delta - 1.0, -1.0, 1.0);
  const double theta = std::acos(arg);
  double r[3];
  for (int k = 0; k < 3; ++k)
    r[k] = 2.0 * delta * std::cos(theta / 3.0 - 2.0943951023931954923 * k);
  std::sort(r, r + 3);
  double middle = polish_cubic_root(r[1], delta, k_cut);
  double upper = polish_cubic_root(r[2], delta, k_cut);
  if (middle <= 0.0) return {0.0, upper, true};
  return {middle, upper, false};
}

namespace {

// L(delta, y) rises without bound as y -> 0+ once lambda <= -1; otherwise it
// approaches delta/(lambda+1).
double loss_limit_at_zero(double delta, double lambda) {
  switch (loss::branch_of(lambda)) {
    case PdlBranch::zero:
      return delta;
    case PdlBranch::neg_one:
      return std::numeric_limits<double>::infinity();
    case PdlBranch::general:
    default:
      return lambda < -1.0 ? std::numeric_limits<double>::infinity()
                           : delta / (lambda + 1.0);
  }
}

// Log-space bisection for L(delta, exp(u)) = k_cut on [u_lo, u_hi], where the
// residual changes sign across the bracket. `rising` says whether the loss
// increases with u on this side of delta.
double bisect_log(double delta, double k_cut, PowerParameter lambda, double u_lo,
                  double u_hi, bool rising) {
  for (int it = 0; it < 200 && (u_hi - u_lo) > 1e-12; ++it) {
    const double mid = 0.5 * (u_lo + u_hi);
    const double f = loss::pdl_loss(delta, std::exp(mid), lambda) - k_cut;
    const bool above = f > 0.0;
    if (above == rising)
      u_hi = mid;
    else
      u_lo = mid;
  }
  return std::exp(0.5 * (u_lo + u_hi));
}

}  // namespace

IntervalBounds bounds_general(double delta, double k_cut, PowerParameter lambda) {
  require_delta_k(delta, k_cut);
  const double log_delta = std::log(delta);

  // Lower bound: the loss decreases in y below delta, so a root exists only
  // when the y -> 0 limit exceeds the cut-off.
  IntervalBounds out;
  const double limit0 = loss_limit_at_zero(delta, lambda.lambda);
  if (limit0 <= k_cut) {
    out.lower = 0.0;
    out.one_sided = true;
  } else {
    const double u_lo = log_delta - 690.775527898213705;  // delta * 1e-300
    if (loss::pdl_loss(delta, std::exp(u_lo), lambda) <= k_cut) {
      out.lower = 0.0;
      out.one_sided = true;
    } else {
      // Loss falls as u rises toward log(delta).
      out.lower = bisect_log(delta, k_cut, lambda, u_lo, log_delta, false);
      out.one_sided = false;
    }
  }

  // Upper bound: double the bracket until the loss exceeds the cut-off.
  double hi = 2.0 * delta;
  int doublings = 1;
  while (loss::pdl_loss(delta, hi, lambda) < k_cut) {
    hi *= 2.0;
    if (++doublings > 64)
      throw NumericalError("interval upper bound: bracket exceeded 2^64 * delta");
  }
  out.upper = bisect_log(delta, k_cut, lambda, log_delta, std::log(hi), true);
  return out;
}

ConditionalReplicates draw_conditional_replicates(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, std::size_t m, std::uint64_t seed,
    std::uint64_t stream) {
  ConditionalReplicates reps;
  reps.law = model.predictive_law(s0, x0);
  reps.m = m;
  reps.log_y.resize(m);
  PhiloxStream rng(seed, stream);
  rng.fill_normal(reps.log_y.data(), m);
  const double sd = std::sqrt(reps.law.v);
  for (double& u : reps.log_y) u = reps.law.mu + sd * u;
  reps.y.resize(m);
  simd::vexp(reps.log_y.data(), reps.y.data(), m);
  return reps;
}

std::pair<IntervalBounds, Cutoff> conditional_interval_from(
    const ConditionalReplicates& reps, PowerParameter lambda, double alpha) {
  const double delta = lognormal::opd_predict(reps.law, lambda);
  std::vector<double> losses(reps.m);
  simd::pdl_loss_batch(delta, std::log(delta), reps.y.data(), reps.log_y.data(),
                       losses.data(), reps.m, lambda.lambda,
                       loss::branch_of(lambda.lambda));
  Cutoff cut{cutoff_from_losses(std::move(losses), alpha), alpha,
             IntervalKind::conditional, reps.m};
  // A zero cut-off (degenerate predictive law) collapses the interval to the
  // predictor itself.
  if (!(cut.value > 0.0)) return {{delta, delta, false}, cut};
  return {bounds_general(delta, cut.value, lambda), cut};
}

UnconditionalReplicates draw_unconditional_replicates(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, std::size_t m, std::uint64_t seed,
    std::uint64_t stream) {
  UnconditionalReplicates reps;
  const auto proj = model.projection(s0);
  reps.x0_beta = x0.dot(model.params().beta);
  reps.law = model.law_from_projection(proj, reps.x0_beta);
  reps.sigma2_w = model.sigma2_w();
  reps.m = m;
  montecarlo::detail::joint_log_draws(model, s0, reps.x0_beta, m, seed, stream,
                                      &proj.w, &reps.w0, &reps.t, nullptr);
  return reps;
}

UnconditionalReplicates draw_unconditional_replicates_reduced(
    const lognormal::PredictiveLaw& law, std::size_t m, std::uint64_t seed,
    std::uint64_t stream) {
  UnconditionalReplicates reps;
  reps.law = law;
  reps.x0_beta = law.x0_beta;
  reps.sigma2_w = law.sigma2_w();
  reps.m = m;
  reps.w0.resize(m);
  reps.t.resize(m);
  // Cholesky of [[s2w, cSc], [cSc, cSc]].
  const double a = std::sqrt(reps.sigma2_w);
  const double b = a > 0.0 ? law.cSc / a : 0.0;
  const double c = std::sqrt(std::max(law.cSc - b * b, 0.0));
  const double mean_w0 = law.x0_beta - 0.5 * reps.sigma2_w;
  PhiloxStream rng(seed, stream);
  for (std::size_t i = 0; i < m; ++i) {
    const double e1 = rng.normal();
    const double e2 = rng.normal();
    reps.w0[i] = mean_w0 + a * e1;
    reps.t[i] = b * e1 + c * e2;
  }
  return reps;
}

std::pair<IntervalBounds, Cutoff> unconditional_interval_from(
    const UnconditionalReplicates& reps, PowerParameter lambda, double alpha) {
  const std::size_t m = reps.m;
  // Refitted predictor per replicate: log delta_m = t_m + b.
  const double b = reps.x0_beta - 0.5 * reps.sigma2_w +
                   0.5 * (lambda.lambda + 1.0) * reps.law.v;
  std::vector<double> log_delta(m), delta(m), y0(m), losses(m);
  for (std::size_t i = 0; i < m; ++i) log_delta[i] = reps.t[i] + b;
  simd::vexp(log_delta.data(), delta.data(), m);
  simd::vexp(reps.w0.data(), y0.data(), m);
  simd::pdl_loss_batch_v(delta.data(), log_delta.data(), y0.data(),
                         reps.w0.data(), losses.data(), m, lambda.lambda,
                         loss::branch_of(lambda.lambda));
  Cutoff cut{cutoff_from_losses(std::move(losses), alpha), alpha,
             IntervalKind::unconditional, m};
  const double delta_actual = lognormal::opd_predict(reps.law, lambda);
  if (!(cut.value > 0.0)) return {{delta_actual, delta_actual, false}, cut};
  return {bounds_general(delta_actual, cut.value, lambda), cut};
}

std::pair<IntervalBounds, Cutoff> unconditional_interval(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, PowerParameter lambda, double alpha,
    std::size_t m, std::uint64_t seed, std::uint64_t stream) {
  if (m < 1) throw std::domain_error("interval: need m >= 1");
  const auto reps = draw_unconditional_replicates(model, s0, x0, m, seed, stream);
  return unconditional_interval_from(reps, lambda, alpha);
}

std::pair<IntervalBounds, Cutoff> conditional_interval(
    const lognormal::LogGaussianModel& model, Point s0,
    const Eigen::VectorXd& x0, PowerParameter lambda, double alpha,
    std::size_t m, std::uint64_t seed, std::uint64_t stream) {
  if (m < 1) throw std::domain_error("interval: need m >= 1");
  const auto reps = draw_conditional_replicates(model, s0, x0, m, seed, stream);
  return conditional_interval_from(reps, lambda, alpha);
}

LoocvResult loocv_coverage_grid(const SpatialDataset& data,
                                const ModelParams& params,
                                const std::vector<double>& lambdas,
                                const LoocvOptions& options) {
  data.validate();
  const Eigen::Index n = data.n();
  if (n < 10) throw std::domain_error("LOOCV: need at least 10 sites");
  if (lambdas.empty()) throw std::domain_error("LOOCV: empty lambda grid");

  LoocvResult result;
  // byte-wise hit matrix: vector<bool> bit packing is not safe to write
  // from concurrent site tasks
  std::vector<std::vector<std::uint8_t>> hits(
      lambdas.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    // Leave-one-out subset.
    SpatialDataset sub;
    sub.locations.reserve(n - 1);
    sub.values.resize(n - 1);
    sub.covariates.resize(n - 1, data.p());
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == static_cast<Eigen::Index>(i)) continue;
      sub.locations.push_back(data.locations[j]);
      sub.values[r] = data.values[j];
      sub.covariates.row(r) = data.covariates.row(j);
      ++r;
    }
    sub.covariate_names = data.covariate_names;

    ModelParams site_params = params;
    if (options.refit) {
      try {
        auto fit = variogram::iterative_gls_fit(sub, options.refit_sigma2_eps,
                                                *options.refit);
        site_params.beta = fit.beta;
        site_params.theta = fit.theta;
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "LOOCV refit failed at site " << i << ": " << e.what();
        throw EstimationError(msg.str());
      }
    }

    const lognormal::LogGaussianModel model(sub, site_params);
    const Point s0 = data.locations[i];
    const Eigen::VectorXd x0 = data.covariates.row(static_cast<Eigen::Index>(i));
    const double z_i = data.values[static_cast<Eigen::Index>(i)];

    if (options.kind == IntervalKind::unconditional) {
      const auto reps = draw_unconditional_replicates(model, s0, x0, options.m, options.seed, i);
      for (std::size_t k = 0; k < lambdas.size(); ++k) {
        const auto [bounds, cut] =
            unconditional_interval_from(reps, lambdas[k], options.alpha);
        hits[k][i] = (z_i >= bounds.lower && z_i <= bounds.upper) ? 1 : 0;
      }
    } else {
      const auto reps = draw_conditional_replicates(model, s0, x0, options.m,
                                                    options.seed, i);
      for (std::size_t k = 0; k < lambdas.size(); ++k) {
        const auto [bounds, cut] =
            conditional_interval_from(reps, lambdas[k], options.alpha);
        hits[k][i] = (z_i >= bounds.lower && z_i <= bounds.upper) ? 1 : 0;
      }
    }
  });

  result.per_site.assign(lambdas.size(),
                         std::vector<bool>(static_cast<std::size_t>(n), false));
  result.coverage.resize(lambdas.size());
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    std::size_t covered = 0;
    for (std::size_t i = 0; i < hits[k].size(); ++i) {
      result.per_site[k][i] = hits[k][i] != 0;
      covered += hits[k][i];
    }
    result.coverage[k] = static_cast<double>(covered) / static_cast<double>(n);
  }
  return result;
}

std::pair<double, std::vector<bool>> loocv_coverage(const SpatialDataset& data,
                                                    const ModelParams& params,
                                                    double lambda,
                                                    const LoocvOptions& options) {
  auto grid = loocv_coverage_grid(data, params, {lambda}, options);
  return {grid.coverage[0], grid.per_site[0]};
}

WidthSelection select_lambda_by_width(const lognormal::LogGaussianModel& model,
                                      const std::vector<Point>& locations,
                                      const std::vector<Eigen::VectorXd>& x0s,
                                      const std::vector<double>& lambda_grid,
                                      double alpha, std::size_t m,
                                      std::uint64_t seed) {
  if (locations.empty())
    throw std::domain_error("lambda selection: need at least one location");
  if (locations.size() != x0s.size())
    throw std::domain_error("lambda selection: locations/covariates mismatch");
  if (lambda_grid.size() < 2)
    throw std::domain_error("lambda selection: need a grid of >= 2 values");

  WidthSelection sel;
  sel.per_location.assign(locations.size(), 0.0);

  parallel_for(locations.size(), [&](std::size_t j) {
    const auto reps = draw_unconditional_replicates(model, locations[j], x0s[j], m, seed, j);
    double best_width = std::numeric_limits<double>::infinity();
    double best_lambda = lambda_grid.front();
    for (double lam : lambda_grid) {
      const auto [bounds, cut] = unconditional_interval_from(reps, lam, alpha);
      const double width = bounds.upper - bounds.lower;
      if (width < best_width * (1.0 - 1e-12)) {
        best_width = width;
        best_lambda = lam;
      } else if (width <= best_width * (1.0 + 1e-12)) {
        // tie: prefer the smaller |lambda|, then the smaller lambda
        if (std::abs(lam) < std::abs(best_lambda) ||
            (std::abs(lam) == std::abs(best_lambda) && lam < best_lambda)) {
          best_width = std::min(best_width, width);
          best_lambda = lam;
        }
      }
    }
    sel.per_location[j] = best_lambda;
  });

  std::vector<double> sorted = sel.per_location;
  std::sort(sorted.begin(), sorted.end());
  // Lower median for even counts.
  sel.lambda_star = sorted[(sorted.size() - 1) / 2];
  return sel;
}

}  // namespace opd::intervals
