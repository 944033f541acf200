#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "opd/errors.hpp"
#include "opd/lognormal.hpp"
#include "opd/variogram.hpp"
#include "opd/rng.hpp"
#include "opd/stats.hpp"

using namespace opd;
using namespace opd::lognormal;

namespace {

LogGaussianModel one_point_model(double z1, const CovarianceParams& theta,
                                 double beta0) {
  SpatialDataset data;
  data.locations = {{0.0, 0.0}};
  data.values = Eigen::VectorXd::Constant(1, z1);
  data.covariates = Eigen::MatrixXd::Ones(1, 1);
  ModelParams params;
  params.beta = Eigen::VectorXd::Constant(1, beta0);
  params.theta = theta;
  return LogGaussianModel(data, params);
}

PredictiveLaw law_of(double mu, double v, double x0_beta, double cSc) {
  PredictiveLaw law;
  law.mu = mu;
  law.v = v;
  law.x0_beta = x0_beta;
  law.cSc = cSc;
  return law;
}

}  // namespace

TEST_CASE("predictive law against a hand bivariate-conditioning oracle") {
  const CovarianceParams theta{1.3, 10.0, 0.2, 0.05};
  const double beta0 = 2.0;
  const double z1 = 5.0;
  auto model = one_point_model(z1, theta, beta0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);

  const double s2w = theta.sigma2_w();
  const double s2z = s2w + theta.sigma2_eps;
  for (double h : {0.0, 2.5, 7.0}) {
    const auto law = model.predictive_law({h, 0.0}, x0);
    // joint of (W(s0), Ztilde_1): cov c, var s2w and s2z
    const double c = variogram::spherical_cov(h, theta.sigma2_eta, theta.range_r) +
                     (h == 0.0 ? theta.sigma2_xi : 0.0);
    const double mean_z = beta0 - 0.5 * (s2w + theta.sigma2_eps);
    const double mu_oracle =
        beta0 - 0.5 * s2w + (c / s2z) * (std::log(z1) - mean_z);
    const double v_oracle = s2w - c * c / s2z;
    CHECK(law.mu == doctest::Approx(mu_oracle).epsilon(1e-12));
    CHECK(law.v == doctest::Approx(v_oracle).epsilon(1e-12));
    CHECK(law.x0_beta == doctest::Approx(beta0));
    CHECK(law.cSc == doctest::Approx(c * c / s2z).epsilon(1e-12));
  }

  // beyond the range: no information, marginal law
  const auto far = model.predictive_law({100.0, 0.0}, x0);
  CHECK(far.mu == doctest::Approx(beta0 - 0.5 * s2w));
  CHECK(far.v == doctest::Approx(s2w));
  CHECK(far.cSc == doctest::Approx(0.0));
}

TEST_CASE("noiseless single datum is interpolated exactly") {
  const CovarianceParams theta{0.8, 5.0, 0.0, 0.0};
  auto model = one_point_model(3.7, theta, 1.0);
  const auto law = model.predictive_law({0.0, 0.0}, Eigen::VectorXd::Ones(1));
  CHECK(law.mu == doctest::Approx(std::log(3.7)).epsilon(1e-12));
  CHECK(law.v == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("OPD predictor of a standard lognormal law") {
  const auto law = law_of(0.0, 1.0, 0.0, 0.0);
  CHECK(opd_predict(law, -1.0) == doctest::Approx(1.0));
  CHECK(opd_predict(law, 0.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-14));
  CHECK(opd_predict(law, 1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(opd_predict(law_of(800.0, 1.0, 0.0, 0.0), 3.0), NumericalError);
}

TEST_CASE("predictor moments, bias, and their signs") {
  // no information: the predictor is the constant exp(x0' beta + 0.5 l v)
  {
    const auto law = law_of(-0.1, 0.2, 0.0, 0.0);  // cSc = 0
    const auto m0 = predictor_moments(law, 0.0);
    CHECK(m0.mean == doctest::Approx(1.0));
    CHECK(m0.variance == doctest::Approx(0.0));
    CHECK(m0.log_var == doctest::Approx(0.0));
  }
  {
    const auto law = law_of(0.0, 0.2, 0.0, 0.1);  // sigma2_w = 0.3
    const auto m = predictor_moments(law, 2.0);
    CHECK(m.mean == doctest::Approx(std::exp(0.2)).epsilon(1e-13));
    CHECK(m.log_mean == doctest::Approx(-0.05 + 0.2).epsilon(1e-12));
    CHECK(m.log_var == doctest::Approx(0.1));
    CHECK(m.variance ==
          doctest::Approx(std::exp(0.4) * std::expm1(0.1)).epsilon(1e-12));
  }
  // unbiasedness at lambda = 0, sign(bias) = sign(lambda) otherwise
  const auto law = law_of(0.3, 0.2, 0.0, 0.15);
  CHECK(bias(law, 0.0) == 0.0);
  CHECK(bias(law, 1.0) == doctest::Approx(std::expm1(0.1)).epsilon(1e-13));
  CHECK(bias(law, -1.0) < 0.0);
  CHECK(bias(law, 2.5) > 0.0);
  // predictor ordering versus the predictive mean
  const double d0 = opd_predict(law, 0.0);
  CHECK(opd_predict(law, -0.5) < d0);
  CHECK(opd_predict(law, 0.5) > d0);
}

TEST_CASE("MSPE closed form") {
  // no data: MSPE equals the marginal variance
  CHECK(mspe(law_of(0.0, 0.2, 0.0, 0.0), 0.0) ==
        doctest::Approx(std::expm1(0.2)).epsilon(1e-13));
  // perfect information: zero error
  CHECK(mspe(law_of(0.4, 0.0, 0.0, 0.3), 0.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(rmspe(law_of(0.0, 0.2, 0.0, 0.1), 1.0) ==
        doctest::Approx(std::sqrt(mspe(law_of(0.0, 0.2, 0.0, 0.1), 1.0))));
}

TEST_CASE("minimised expected losses and their identities") {
  const auto law = law_of(0.0, 1.0, 0.2, 0.3);
  // ELP equals (delta_lambda - delta_0) / lambda
  CHECK(elp_min(law, 2.0) ==
        doctest::Approx((std::exp(1.5) - std::exp(0.5)) / 2.0).epsilon(1e-13));
  for (double lambda : {-2.0, -0.5, 1.0, 3.0}) {
    CHECK(elp_min(law, lambda) ==
          doctest::Approx((opd_predict(law, lambda) - opd_predict(law, 0.0)) / lambda)
              .epsilon(1e-12));
    CHECK(elj_min(law, lambda) ==
          doctest::Approx(bias(law, lambda) / lambda).epsilon(1e-12));
    CHECK(elp_min(law, lambda) >= 0.0);
    CHECK(elj_min(law, lambda) >= 0.0);
  }
  // continuity of the lambda -> 0 limit
  CHECK(elp_min(law, 1e-8) == doctest::Approx(elp_min(law, 0.0)).epsilon(1e-6));
  CHECK(elj_min(law, 1e-8) == doctest::Approx(elj_min(law, 0.0)).epsilon(1e-6));
  // perfect information: no expected loss
  CHECK(elp_min(law_of(0.5, 0.0, 0.5, 0.2), 1.5) == 0.0);
  CHECK(elj_min(law_of(0.5, 0.0, 0.5, 0.2), 1.5) == 0.0);
}

TEST_CASE("monotonicity of the predictor in lambda") {
  PhiloxStream rng(17, 0);
  for (int k = 0; k < 50; ++k) {
    const auto law = law_of(rng.uniform(-1, 1), rng.uniform(0.01, 1.0),
                            rng.uniform(-1, 1), rng.uniform(0.0, 0.5));
    double prev = opd_predict(law, -3.0);
    for (double lambda = -2.5; lambda <= 3.0; lambda += 0.5) {
      const double cur = opd_predict(law, lambda);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("quantile calibration") {
  PhiloxStream rng(18, 0);
  for (int k = 0; k < 50; ++k) {
    const double v = rng.uniform(0.01, 4.0);
    const auto law = law_of(rng.uniform(-1, 1), v, 0.0, 0.0);
    CHECK(calibrate_lambda(law, 0.5) == -1.0);
    for (double q : {0.05, 0.25, 0.75, 0.95}) {
      const double lam = calibrate_lambda(law, q);
      CHECK(opd_predict(law, lam) ==
            doctest::Approx(quantile(law, q)).epsilon(1e-10));
    }
  }
  CHECK(calibrate_lambda(law_of(0, 1.0, 0, 0), 0.975) ==
        doctest::Approx(2.0 * 1.959963984540054 - 1.0).epsilon(1e-9));
  CHECK(calibrate_lambda(law_of(0, 4.0, 0, 0), 0.9) ==
        doctest::Approx(1.2815515655446004 - 1.0).epsilon(1e-9));
  CHECK_THROWS_AS(calibrate_lambda(law_of(0, 0.0, 0, 0.2), 0.9), EstimationError);
  CHECK_THROWS_AS(calibrate_lambda(law_of(0, 1.0, 0, 0), 0.0), std::domain_error);
}

TEST_CASE("scale equivariance of prediction and uncertainty") {
  const auto law = law_of(0.4, 0.3, 0.7, 0.2);
  const double nu = 3.5, lnu = std::log(nu);
  const auto scaled = law_of(0.4 + lnu, 0.3, 0.7 + lnu, 0.2);
  for (double lambda : {-1.5, 0.0, 0.5, 2.0}) {
    CHECK(opd_predict(scaled, lambda) ==
          doctest::Approx(nu * opd_predict(law, lambda)).epsilon(1e-12));
    CHECK(bias(scaled, lambda) ==
          doctest::Approx(nu * bias(law, lambda)).epsilon(1e-12).scale(1e-14));
    CHECK(elp_min(scaled, lambda) ==
          doctest::Approx(nu * elp_min(law, lambda)).epsilon(1e-12).scale(1e-14));
    CHECK(elj_min(scaled, lambda) ==
          doctest::Approx(nu * elj_min(law, lambda)).epsilon(1e-12).scale(1e-14));
    CHECK(mspe(scaled, lambda) ==
          doctest::Approx(nu * nu * mspe(law, lambda)).epsilon(1e-12));
    // normalised quantities shrug off the rescaling
    CHECK(bias(scaled, lambda) / std::exp(scaled.x0_beta) ==
          doctest::Approx(bias(law, lambda) / std::exp(law.x0_beta))
              .epsilon(1e-12).scale(1e-14));
  }
}

TEST_CASE("model construction validates shapes") {
  SpatialDataset data;
  data.locations = {{0, 0}, {1, 1}};
  data.values = Eigen::VectorXd::Constant(2, 2.0);
  data.covariates = Eigen::MatrixXd::Ones(2, 1);
  ModelParams params;
  params.beta = Eigen::VectorXd::Ones(2);  // wrong length
  params.theta = CovarianceParams{1.0, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(LogGaussianModel(data, params), std::domain_error);
}
