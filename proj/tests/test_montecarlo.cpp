#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "opd/errors.hpp"
#include "opd/lognormal.hpp"
#include "opd/variogram.hpp"
#include "opd/montecarlo.hpp"
#include "opd/rng.hpp"
#include "opd/stats.hpp"

using namespace opd;
using namespace opd::montecarlo;

namespace {

PredictiveSamples samples_of(std::vector<double> draws) {
  PredictiveSamples s;
  s.draws = std::move(draws);
  return s;
}

lognormal::PredictiveLaw law_of(double mu, double v) {
  lognormal::PredictiveLaw law;
  law.mu = mu;
  law.v = v;
  law.x0_beta = mu;
  law.cSc = 0.0;
  return law;
}

}  // namespace

TEST_CASE("OPD estimate hand values") {
  CHECK(opd_estimate(samples_of({1, 2, 4}), 1.0) ==
        doctest::Approx(std::sqrt(7.0)).epsilon(1e-12));
  CHECK(opd_estimate(samples_of({1, 4}), -1.0) == doctest::Approx(2.0).epsilon(1e-12));
  for (double lambda : {-2.5, -1.0, 0.0, 1.0, 3.0}) {
    CHECK(opd_estimate(samples_of({3.3, 3.3, 3.3}), lambda) ==
          doctest::Approx(3.3).epsilon(1e-12));
  }
  CHECK_THROWS_AS(opd_estimate(samples_of({}), 1.0), std::domain_error);
  CHECK_THROWS_AS(opd_estimate(samples_of({1.0, -1.0}), 1.0), std::domain_error);
}

TEST_CASE("OPD estimate scale equivariance and branch continuity") {
  PhiloxStream rng(40, 0);
  std::vector<double> draws(400);
  for (auto& d : draws) d = std::exp(rng.normal());
  const double nu = 13.7;
  for (double lambda : {-3.0, -1.0, -0.4, 0.0, 1.0, 2.0}) {
    auto scaled = draws;
    for (auto& d : scaled) d *= nu;
    CHECK(opd_estimate(samples_of(scaled), lambda) ==
          doctest::Approx(nu * opd_estimate(samples_of(draws), lambda)).epsilon(1e-10));
  }
  const double at = opd_estimate(samples_of(draws), -1.0);
  CHECK(opd_estimate(samples_of(draws), -1.0 + 1e-8) == doctest::Approx(at).epsilon(1e-6));
  CHECK(opd_estimate(samples_of(draws), -1.0 - 1e-8) == doctest::Approx(at).epsilon(1e-6));
}

TEST_CASE("Monte Carlo estimator converges to the closed form") {
  const auto law = law_of(0.4, 0.49);
  double worst_small = 0.0, worst_big = 0.0;
  for (double lambda : {-3.0, -1.5, 0.0, 1.5, 3.0}) {
    const double exact = lognormal::opd_predict(law, lambda);
    const auto small = sample_predictive(law, 1000, 7, 1);
    const auto big = sample_predictive(law, 1000000, 7, 2);
    worst_small = std::max(worst_small,
                           std::abs(opd_estimate(small, lambda) / exact - 1.0));
    worst_big = std::max(worst_big, std::abs(opd_estimate(big, lambda) / exact - 1.0));
  }
  CHECK(worst_big < 0.01);
  CHECK(worst_big < worst_small);
}

TEST_CASE("estimator variance formula against replications") {
  CHECK(opd_estimator_variance(samples_of({2, 2, 2, 2}), 1.3) ==
        doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(opd_estimator_variance(samples_of({2.0}), 1.0), std::domain_error);

  // lambda = 0 reduces to var(y)/M
  PhiloxStream rng(41, 0);
  std::vector<double> y(500);
  for (auto& v : y) v = std::exp(0.3 * rng.normal());
  CHECK(opd_estimator_variance(samples_of(y), 0.0) ==
        doctest::Approx(stats::variance(y.data(), y.size()) / 500.0).epsilon(1e-10));

  // replication oracle at lambda = 1 on lognormal(0,1) draws
  const auto law = law_of(0.0, 1.0);
  const std::size_t m = 10000;
  const int reps = 500;
  std::vector<double> estimates(reps);
  double mean_formula = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto s = sample_predictive(law, m, 99, 1000 + r);
    estimates[r] = opd_estimate(s, 1.0);
    mean_formula += opd_estimator_variance(s, 1.0) / reps;
  }
  const double emp = stats::variance(estimates.data(), reps);
  CHECK(emp == doctest::Approx(mean_formula).epsilon(0.25));
}

TEST_CASE("delta-method predictor") {
  CHECK(delta_method_predictor(3.0, 0.0, 2.0) == doctest::Approx(3.0));
  CHECK(delta_method_predictor(3.0, 0.5, 0.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(delta_method_predictor(0.0, 1.0, 1.0), std::domain_error);
  // breakdown is reported, not clamped: large lambda, large CV
  CHECK_THROWS_AS(delta_method_predictor(1.0, 5.0, 4.0), NumericalError);

  // lognormal oracle at mu=0, v=0.04
  const double v = 0.04;
  const double mean = std::exp(0.5 * v);
  const double variance = std::exp(v) * std::expm1(v);
  const double exact = std::exp(v);  // lambda = 1
  const double approx = delta_method_predictor(mean, variance, 1.0);
  CHECK(std::abs(approx / exact - 1.0) < 1e-3);

  // O(CV^4) error: halving v (so quartering CV^4) cuts the error by ~4x;
  // at lambda = 1 the fractional-moment step is exact and only the O(CV^6)
  // root expansion error remains, giving ~8x.
  for (double lambda : {-1.0, 0.5, 1.0}) {
    auto err = [&](double vv) {
      const double mn = std::exp(0.5 * vv);
      const double vr = std::exp(vv) * std::expm1(vv);
      const double ex = std::exp(0.5 * (lambda + 1.0) * vv);
      return std::abs(delta_method_predictor(mn, vr, lambda) - ex);
    };
    const double ratio = err(0.04) / err(0.02);
    CHECK(ratio > 3.5);
    CHECK(ratio < 10.0);
  }
  {
    auto err_1 = [&](double vv) {
      const double mn = std::exp(0.5 * vv);
      const double vr = std::exp(vv) * std::expm1(vv);
      return std::abs(delta_method_predictor(mn, vr, 1.0) - std::exp(vv));
    };
    CHECK(err_1(0.04) / err_1(0.02) > 6.5);
  }
}

TEST_CASE("delta-method fractional moment") {
  CHECK(delta_method_fractional_moment(5.0, 2.0, 0.0) == doctest::Approx(5.0));
  // lambda = 1 makes the second-order expansion exact: E(Y^2) = var + mean^2
  CHECK(delta_method_fractional_moment(2.0, 1.0, 1.0) == doctest::Approx(5.0));
  CHECK(delta_method_fractional_moment(1.0, 0.01, 2.0) == doctest::Approx(1.03));
  CHECK_THROWS_AS(delta_method_fractional_moment(1.0, 0.1, -1.0), std::domain_error);
}

TEST_CASE("block prediction") {
  BlockSpec block{{{0, 0}, {1, 0}}, {0.5, 0.5}};
  CHECK(block_predict_average({7.0, 7.0}, block) == doctest::Approx(7.0));
  CHECK(block_predict_average({2.0, 4.0}, block) == doctest::Approx(3.0));
  CHECK_THROWS_AS(block_predict_average({1.0}, block), std::domain_error);
  BlockSpec bad{{{0, 0}}, {0.9}};
  CHECK_THROWS_AS(bad.validate(), std::domain_error);

  // bounded by the extremes of its inputs
  PhiloxStream rng(42, 0);
  for (int k = 0; k < 50; ++k) {
    const int npts = 2 + static_cast<int>(rng.below(6));
    BlockSpec spec;
    std::vector<double> w(npts), d(npts);
    double tot = 0.0;
    for (int i = 0; i < npts; ++i) {
      spec.quadrature_points.push_back({rng.uniform01(), rng.uniform01()});
      w[i] = rng.uniform(0.1, 1.0);
      tot += w[i];
      d[i] = rng.uniform(1.0, 9.0);
    }
    for (int i = 0; i < npts; ++i) spec.weights.push_back(w[i] / tot);
    // renormalize exactly
    double s = 0.0;
    for (double wi : spec.weights) s += wi;
    spec.weights.back() += 1.0 - s;
    const double avg = block_predict_average(d, spec);
    CHECK(avg >= *std::min_element(d.begin(), d.end()) - 1e-12);
    CHECK(avg <= *std::max_element(d.begin(), d.end()) + 1e-12);
  }

  // quadrature refinement on a smooth predictor surface changes little
  auto surface = [](double u) { return 2.0 + std::sin(3.0 * u); };
  auto block_avg = [&](int npts) {
    BlockSpec spec;
    std::vector<double> vals;
    for (int i = 0; i < npts; ++i) {
      const double u = (i + 0.5) / npts;
      spec.quadrature_points.push_back({u, 0.0});
      spec.weights.push_back(1.0 / npts);
      vals.push_back(surface(u));
    }
    return block_predict_average(vals, spec);
  };
  CHECK(std::abs(block_avg(64) / block_avg(32) - 1.0) < 0.005);

  // single-point block degenerates to the point delta-method predictor
  CHECK(block_predict_delta(3.0, 0.4, 1.5) ==
        doctest::Approx(delta_method_predictor(3.0, 0.4, 1.5)));
  CHECK(block_predict_delta(3.0, 0.0, 1.5) == doctest::Approx(3.0));
}

TEST_CASE("two-point block delta method against a joint lognormal oracle") {
  // bivariate lognormal with correlation rho on the log scale
  const double v = 0.05, rho = 0.6, mu = 0.2;
  const double cov_log = rho * v;
  PhiloxStream rng(43, 0);
  const std::size_t m = 1000000;
  std::vector<double> yb(m);
  const double a = std::sqrt(v), b = rho * a, c = std::sqrt(v - b * b);
  for (std::size_t i = 0; i < m; ++i) {
    const double e1 = rng.normal(), e2 = rng.normal();
    const double y1 = std::exp(mu + a * e1);
    const double y2 = std::exp(mu + b * e1 + c * e2);
    yb[i] = 0.5 * (y1 + y2);
  }
  // block moments from point-level moments and the cross covariance
  const double m1 = std::exp(mu + 0.5 * v);
  const double var1 = std::exp(2.0 * mu + v) * std::expm1(v);
  const double cov12 = std::exp(2.0 * mu + v) * std::expm1(cov_log);
  const double block_mean = m1;
  const double block_var = 0.25 * (2.0 * var1 + 2.0 * cov12);
  const double approx = block_predict_delta(block_mean, block_var, 1.0);
  const double mc = opd_estimate(samples_of(yb), 1.0);
  CHECK(approx == doctest::Approx(mc).epsilon(0.01));
}

TEST_CASE("predictive sampler: moments and determinism") {
  const auto law0 = law_of(0.7, 0.0);
  const auto degenerate = sample_predictive(law0, 100, 5, 0);
  for (double d : degenerate.draws) CHECK(d == doctest::Approx(std::exp(0.7)));

  const auto law = law_of(0.2, 0.36);
  const std::size_t m = 1000000;
  const auto s = sample_predictive(law, m, 11, 3);
  const double mean = stats::mean(s.draws.data(), m);
  const double expect = std::exp(0.2 + 0.18);
  const double sd = expect * std::sqrt(std::expm1(0.36));
  CHECK(std::abs(mean - expect) < 3.0 * sd / std::sqrt(static_cast<double>(m)));

  const auto again = sample_predictive(law, 1000, 11, 3);
  for (std::size_t i = 0; i < again.draws.size(); ++i)
    CHECK(again.draws[i] == s.draws[i]);  // bit-identical prefix
}

TEST_CASE("joint sampler matches the marginal and cross moments") {
  SpatialDataset data;
  data.locations = {{0, 0}, {3, 0}, {0, 4}};
  data.values = Eigen::VectorXd::Constant(3, 2.0);
  data.covariates = Eigen::MatrixXd::Ones(3, 1);
  ModelParams params;
  params.beta = Eigen::VectorXd::Constant(1, 0.5);
  params.theta = CovarianceParams{0.3, 6.0, 0.05, 0.02};
  const lognormal::LogGaussianModel model(data, params);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const Point s0{1.0, 1.0};

  const std::size_t m = 400000;
  const auto js = sample_joint(model, s0, x0, m, 21, 9);
  REQUIRE(js.y0.size() == static_cast<Eigen::Index>(m));
  REQUIRE(js.z.rows() == 3);

  // marginal mean of the process at s0 is exp(x0' beta)
  const double mean_y0 = js.y0.mean();
  const double expect = std::exp(0.5);
  const double sd_y0 = expect * std::sqrt(std::expm1(params.theta.sigma2_w()));
  CHECK(std::abs(mean_y0 - expect) < 3.0 * sd_y0 / std::sqrt(static_cast<double>(m)));

  // empirical covariance of the log values against the model covariance
  const Eigen::VectorXd ly0 = js.y0.array().log();
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd lzi = js.z.row(i).transpose().array().log();
    const double c_emp =
        ((ly0.array() - ly0.mean()) * (lzi.array() - lzi.mean())).sum() / (m - 1);
    const double c_model = variogram::spherical_cov(
        distance(s0, data.locations[i]), params.theta.sigma2_eta, params.theta.range_r);
    CHECK(std::abs(c_emp - c_model) < 0.01);
  }

  // degenerate model: constant y0
  ModelParams flat = params;
  flat.theta = CovarianceParams{0.0, 6.0, 0.0, 0.0};
  const lognormal::LogGaussianModel degen(data, flat);
  const auto fixed = sample_joint(degen, s0, x0, 50, 3, 0);
  for (Eigen::Index i = 0; i < fixed.y0.size(); ++i)
    CHECK(fixed.y0[i] == doctest::Approx(std::exp(0.5)).epsilon(1e-9));
}
