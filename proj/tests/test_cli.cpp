#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "opd/errors.hpp"
#include "opd/intervals.hpp"
#include "opd/lognormal.hpp"
#include "opd/model_io.hpp"
#include "opd/pipeline.hpp"
#include "opd/rng.hpp"

using namespace opd;
using namespace opd::pipeline;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string("/tmp/opd_test_") + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small synthetic dataset written through the simulate pipeline itself.
io::CsvTable make_sites_table(int n, std::uint64_t seed) {
  PhiloxStream rng(seed, 0);
  io::CsvTable t;
  t.header = {"x", "y", "dist", "soil"};
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> row(4);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", rng.uniform01() * 2000.0);
    row[0] = buf;
    std::snprintf(buf, sizeof(buf), "%.3f", rng.uniform01() * 2000.0);
    row[1] = buf;
    std::snprintf(buf, sizeof(buf), "%.5f", rng.uniform01());
    row[2] = buf;
    row[3] = (i % 3 == 0) ? "a" : (i % 3 == 1 ? "b" : "c");
    t.rows.push_back(row);
  }
  return t;
}

io::CovariateSpec spec_dist_soil() {
  io::CovariateSpec spec;
  spec.numeric = {"dist"};
  spec.categorical = {"soil"};
  spec.x_coordinate = true;
  return spec;
}

io::ModelFile fit_small_model(std::uint64_t seed) {
  auto sites = make_sites_table(90, seed);
  SimulateOptions sim;
  sim.covariates = spec_dist_soil();
  sim.beta = {4.0, -1.2, 0.3, -0.2, 0.1};
  sim.theta = CovarianceParams{0.2, 700.0, 0.05, 0.01};
  sim.seed = seed;
  const auto values = run_simulate(sites, sim);
  const std::string path = tmp_path("sim_fit.csv");
  write_simulated_csv(path, sites, values);

  FitOptions opt;
  opt.covariates = spec_dist_soil();
  opt.sigma2_eps = 0.01;
  return run_fit(io::read_csv(path), std::nullopt, opt);
}

}  // namespace

TEST_CASE("lambda spec parsing") {
  CHECK(parse_lambda_spec("0.5").mode == LambdaMode::constant);
  CHECK(parse_lambda_spec("-1").value == doctest::Approx(-1.0));
  const auto cal = parse_lambda_spec("calibrate:0.9");
  CHECK(cal.mode == LambdaMode::calibrate);
  CHECK(cal.q == doctest::Approx(0.9));
  CHECK(parse_lambda_spec("select-by-width").mode == LambdaMode::select_by_width);
  CHECK_THROWS_AS(parse_lambda_spec("calibrate:1.5"), ConfigError);
  CHECK_THROWS_AS(parse_lambda_spec("bogus"), ConfigError);
}

TEST_CASE("design assembly: treatment coding, baseline, standardisation") {
  io::CsvTable t;
  t.header = {"x", "y", "value", "dist", "soil"};
  t.rows = {{"0", "0", "1.5", "0.1", "b"},
            {"10", "0", "2.5", "0.9", "a"},
            {"20", "5", "3.5", "0.4", "c"},
            {"30", "5", "4.5", "0.2", "a"},
            {"40", "9", "2.0", "0.6", "b"},
            {"55", "3", "3.0", "0.7", "a"}};
  io::DesignInfo info;
  info.spec = spec_dist_soil();
  const auto data = io::assemble_dataset(t, info, true);

  REQUIRE(info.names == std::vector<std::string>{"intercept", "dist", "soil_b",
                                                 "soil_c", "x_std"});
  CHECK(info.levels.at("soil") == std::vector<std::string>{"a", "b", "c"});
  CHECK(data.covariates(0, 2) == 1.0);  // first row is soil b
  CHECK(data.covariates(1, 2) == 0.0);  // baseline a
  CHECK(data.covariates(2, 3) == 1.0);  // soil c
  // standardized x has mean zero, unit variance
  const auto xs = data.covariates.col(4);
  CHECK(xs.mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(xs.squaredNorm() / 5.0 == doctest::Approx(1.0));

  // grid rows with an unseen level fail individually, the rest survive
  io::CsvTable g;
  g.header = {"x", "y", "dist", "soil"};
  g.rows = {{"5", "1", "0.3", "b"}, {"6", "1", "0.2", "z"}, {"7", "1", "bad", "a"}};
  const auto grid = io::assemble_grid(g, info);
  REQUIRE(grid.size() == 3);
  CHECK(grid[0].ok);
  CHECK_FALSE(grid[1].ok);
  CHECK(grid[1].error.find("unseen level") != std::string::npos);
  CHECK_FALSE(grid[2].ok);
}

TEST_CASE("model file round trip preserves everything") {
  const auto model = fit_small_model(301);
  const std::string path = tmp_path("model.txt");
  io::write_model_file(path, model);
  const auto back = io::read_model_file(path);

  CHECK(back.params.theta.sigma2_eta == model.params.theta.sigma2_eta);
  CHECK(back.params.theta.range_r == model.params.theta.range_r);
  CHECK(back.params.theta.sigma2_xi == model.params.theta.sigma2_xi);
  CHECK(back.params.theta.sigma2_eps == model.params.theta.sigma2_eps);
  CHECK(back.iterations == model.iterations);
  CHECK(back.converged == model.converged);
  REQUIRE(back.params.beta.size() == model.params.beta.size());
  for (Eigen::Index k = 0; k < back.params.beta.size(); ++k)
    CHECK(back.params.beta[k] == model.params.beta[k]);
  CHECK(back.design.names == model.design.names);
  CHECK(back.design.x_mean == model.design.x_mean);
  CHECK(back.design.x_sd == model.design.x_sd);
  REQUIRE(back.data.n() == model.data.n());
  for (Eigen::Index i = 0; i < back.data.n(); ++i)
    CHECK(back.data.values[i] == model.data.values[i]);
  CHECK(back.semivariogram.bins.size() == model.semivariogram.bins.size());
  CHECK(back.trace.size() == model.trace.size());
}

TEST_CASE("simulate: exact values in the degenerate case, moments otherwise") {
  auto sites = make_sites_table(40, 99);
  SimulateOptions opt;
  opt.covariates = spec_dist_soil();
  opt.beta = {1.0, -0.5, 0.2, -0.1, 0.05};
  opt.theta = CovarianceParams{0.0, 100.0, 0.0, 0.0};
  opt.seed = 1;
  const auto exact = run_simulate(sites, opt);

  io::DesignInfo info;
  info.spec = opt.covariates;
  io::CsvTable with_value = sites;
  with_value.header.push_back("value");
  for (auto& row : with_value.rows) row.push_back("1");
  const auto data = io::assemble_dataset(with_value, info, true);
  const Eigen::VectorXd beta =
      Eigen::Map<const Eigen::VectorXd>(opt.beta.data(), 5);
  for (int i = 0; i < 40; ++i)
    CHECK(exact[static_cast<std::size_t>(i)] ==
          doctest::Approx(std::exp(data.covariates.row(i).dot(beta))).epsilon(1e-12));

  // two sites, many replicate seeds: the empirical mean matches exp(x'beta)
  auto one = make_sites_table(2, 7);
  SimulateOptions stoch;
  stoch.covariates.numeric = {"dist"};
  stoch.beta = {1.0, -0.5};
  stoch.theta = CovarianceParams{0.1, 100.0, 0.05, 0.02};
  const int reps = 2000;
  double sum = 0.0, sum_log = 0.0, sum_log2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    stoch.seed = 1000 + r;
    const double v = run_simulate(one, stoch)[0];
    sum += v;
    sum_log += std::log(v);
    sum_log2 += std::log(v) * std::log(v);
  }
  const double dist0 = io::parse_double(one.rows[0][2], "dist");
  const double xb = 1.0 - 0.5 * dist0;
  const double s2 = stoch.theta.sigma2_w() + stoch.theta.sigma2_eps;
  const double expect_mean = std::exp(xb);
  const double se = expect_mean * std::sqrt(std::expm1(s2) / reps);
  CHECK(std::abs(sum / reps - expect_mean) < 4.0 * se);
  const double var_log = (sum_log2 - sum_log * sum_log / reps) / (reps - 1);
  CHECK(var_log == doctest::Approx(s2).epsilon(0.15));
}

TEST_CASE("predict: lambda modes, normalisation, and zero-bias at lambda 0") {
  const auto model = fit_small_model(302);
  io::CsvTable grid;
  grid.header = {"x", "y", "dist", "soil"};
  grid.rows = {{"100", "100", "0.5", "a"},
               {"900", "300", "0.2", "b"},
               {"1500", "1500", "0.8", "c"}};

  PredictOptions opt;
  opt.lambda = parse_lambda_spec("0");
  opt.m = 4000;
  opt.seed = 9;
  const auto rows = run_predict(model, grid, opt);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    REQUIRE(r.ok);
    CHECK(r.bias == 0.0);  // lambda = 0 predictor is unbiased
    CHECK(r.lambda_used == 0.0);
    CHECK(r.lower < r.delta);
    CHECK(r.delta < r.upper);
    CHECK(r.normalizer > 0.0);
  }

  PredictOptions cal;
  cal.lambda = parse_lambda_spec("calibrate:0.5");
  cal.m = 4000;
  cal.seed = 9;
  for (const auto& r : run_predict(model, grid, cal)) {
    REQUIRE(r.ok);
    CHECK(r.lambda_used == doctest::Approx(-1.0));  // median calibration
  }

  // degenerate model: no spatial variance anywhere -> no uncertainty fields
  io::ModelFile flat = model;
  flat.params.theta = CovarianceParams{0.0, 700.0, 0.0, 0.0};
  const auto frows = run_predict(flat, grid, opt);
  for (const auto& r : frows) {
    REQUIRE(r.ok);
    CHECK(r.bias == 0.0);
    CHECK(r.elp == 0.0);
    CHECK(r.elj == 0.0);
    CHECK(r.rmspe == doctest::Approx(0.0).scale(1.0));
  }

  // bad grid rows are reported, the run continues
  io::CsvTable broken = grid;
  broken.rows.push_back({"1", "1", "0.1", "unknown_level"});
  const auto partial = run_predict(model, broken, opt);
  REQUIRE(partial.size() == 4);
  CHECK(partial[0].ok);
  CHECK_FALSE(partial[3].ok);

  const std::string out = tmp_path("pred.csv");
  write_prediction_csv(out, partial);
  const std::string text = read_file(out);
  CHECK(text.find("unseen level") != std::string::npos);
  CHECK(text.find("delta_norm") != std::string::npos);
}

TEST_CASE("interval table: quadratic cross-check and width ratio") {
  const auto model = fit_small_model(303);
  io::CsvTable grid;
  grid.header = {"x", "y", "dist", "soil"};
  grid.rows = {{"250", "250", "0.4", "b"}, {"1200", "800", "0.6", "a"}};

  IntervalsOptions opt;
  opt.lambda = 1.0;
  opt.m = 20000;
  opt.seed = 4;
  const auto rows = run_intervals(model, grid, opt);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    REQUIRE(r.ok);
    // lambda = 1 bounds must agree with the closed-form quadratic ones
    const auto qc = intervals::bounds_quadratic(r.delta, r.cond_cutoff);
    CHECK(r.cond_lower == doctest::Approx(qc.lower).epsilon(1e-9));
    CHECK(r.cond_upper == doctest::Approx(qc.upper).epsilon(1e-9));
    const auto qu = intervals::bounds_quadratic(r.delta, r.unc_cutoff);
    CHECK(r.unc_lower == doctest::Approx(qu.lower).epsilon(1e-9));
    CHECK(r.unc_upper == doctest::Approx(qu.upper).epsilon(1e-9));
    CHECK(r.width_ratio ==
          doctest::Approx((r.cond_upper - r.cond_lower) /
                          (r.unc_upper - r.unc_lower)));
  }

  // width grows as alpha shrinks
  IntervalsOptions tight = opt;
  tight.alpha = 0.2;
  const auto narrow = run_intervals(model, grid, tight);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(narrow[i].unc_upper - narrow[i].unc_lower <=
          rows[i].unc_upper - rows[i].unc_lower);
  }
}

TEST_CASE("coverage rows and CSV output") {
  const auto model = fit_small_model(304);
  CoverageOptions opt;
  opt.lambdas = {0.0};
  opt.alpha = 0.1;
  opt.m = 2000;
  opt.seed = 11;
  opt.conditional = true;
  opt.unconditional = false;
  const auto rows = run_coverage(model, opt);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].kind == "conditional");
  CHECK(rows[0].coverage >= 0.0);
  CHECK(rows[0].coverage <= 1.0);
  CHECK(rows[0].sites == static_cast<std::size_t>(model.data.n()));
}

TEST_CASE("asymmetry table reproduces the family identities") {
  AsymmetryOptions opt;
  opt.lambdas = {-2.0, 1.0};
  opt.qtl_q = {0.5};
  opt.f_points = 19;
  const auto rows = run_asymmetry(opt);
  double sel_at[20] = {0};
  for (const auto& r : rows) {
    CHECK(r.f > 0.0);
    CHECK(r.f < 1.0);
    if (r.loss == "sel") sel_at[static_cast<int>(r.f * 20 + 0.5)] = r.value;
  }
  for (const auto& r : rows) {
    if (r.loss == "pdl" && r.param == 1.0)
      CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
    if (r.loss == "pdl" && r.param == -2.0)
      CHECK(r.value ==
            doctest::Approx(sel_at[static_cast<int>(r.f * 20 + 0.5)]).epsilon(1e-9));
  }
}

TEST_CASE("CSV runs are byte-identical under a fixed seed") {
  const auto model = fit_small_model(305);
  io::CsvTable grid;
  grid.header = {"x", "y", "dist", "soil"};
  grid.rows = {{"100", "700", "0.4", "a"}, {"777", "200", "0.1", "c"}};
  PredictOptions opt;
  opt.lambda = parse_lambda_spec("-0.5");
  opt.m = 3000;
  opt.seed = 123;
  const std::string p1 = tmp_path("rep1.csv"), p2 = tmp_path("rep2.csv");
  write_prediction_csv(p1, run_predict(model, grid, opt));
  write_prediction_csv(p2, run_predict(model, grid, opt));
  CHECK(read_file(p1) == read_file(p2));
  CHECK(read_file(p1).find("delta") != std::string::npos);
}

#ifdef OPD_BINARY
TEST_CASE("command-line exit codes") {
  const std::string bin = OPD_BINARY;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  // unknown flag and missing required option are configuration errors (2)
  CHECK(WEXITSTATUS(std::system((bin + " fit --no-such-flag 2>/dev/null").c_str())) == 2);
  CHECK(WEXITSTATUS(std::system(
            (bin + " predict --model /nonexistent --grid /nonexistent 2>/dev/null").c_str())) == 2);
}
#endif

TEST_CASE("normalised outputs are invariant to rescaling the data") {
  // PDL is homogeneous of degree one, so scaling every measurement by nu
  // shifts the fitted intercept by log(nu) and leaves every normalised
  // column untouched.
  auto sites = make_sites_table(90, 306);
  SimulateOptions sim;
  sim.covariates = spec_dist_soil();
  sim.beta = {4.0, -1.2, 0.3, -0.2, 0.1};
  sim.theta = CovarianceParams{0.2, 700.0, 0.05, 0.01};
  sim.seed = 306;
  const auto values = run_simulate(sites, sim);
  auto scaled = values;
  for (auto& v : scaled) v *= 12.5;

  const std::string p1 = tmp_path("scale1.csv"), p2 = tmp_path("scale2.csv");
  write_simulated_csv(p1, sites, values);
  write_simulated_csv(p2, sites, scaled);
  FitOptions fopt;
  fopt.covariates = spec_dist_soil();
  fopt.sigma2_eps = 0.01;
  const auto m1 = run_fit(io::read_csv(p1), std::nullopt, fopt);
  const auto m2 = run_fit(io::read_csv(p2), std::nullopt, fopt);
  CHECK(m2.params.beta[0] - m1.params.beta[0] ==
        doctest::Approx(std::log(12.5)).epsilon(1e-8));

  io::CsvTable grid;
  grid.header = {"x", "y", "dist", "soil"};
  grid.rows = {{"300", "400", "0.3", "b"}, {"1500", "900", "0.7", "c"}};
  PredictOptions popt;
  popt.lambda = parse_lambda_spec("1");
  popt.m = 4000;
  popt.seed = 5;
  const auto r1 = run_predict(m1, grid, popt);
  const auto r2 = run_predict(m2, grid, popt);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    REQUIRE(r1[i].ok);
    REQUIRE(r2[i].ok);
    CHECK(r2[i].delta / r2[i].normalizer ==
          doctest::Approx(r1[i].delta / r1[i].normalizer).epsilon(1e-8));
    CHECK(r2[i].bias / r2[i].normalizer ==
          doctest::Approx(r1[i].bias / r1[i].normalizer).epsilon(1e-6).scale(1e-9));
    CHECK((r2[i].upper - r2[i].lower) / r2[i].normalizer ==
          doctest::Approx((r1[i].upper - r1[i].lower) / r1[i].normalizer)
              .epsilon(1e-8));
  }
}

TEST_CASE("width ratio crosses one near the normalised predictor of one") {
  // On the bundled fixture, conditional intervals are narrower than
  // unconditional ones where the normalised predictor is small and wider
  // where it is large.
  const std::string sites = std::string(OPD_SOURCE_DIR) + "/data/zinc_sites.csv";
  const std::string dup = std::string(OPD_SOURCE_DIR) + "/data/duplicates.csv";
  const std::string gridp = std::string(OPD_SOURCE_DIR) + "/data/zinc_grid.csv";
  FitOptions fopt;
  fopt.covariates.numeric = {"dist"};
  fopt.covariates.categorical = {"soil", "ffreq"};
  fopt.covariates.x_coordinate = true;
  const auto model = run_fit(io::read_csv(sites), io::read_csv(dup), fopt);

  io::CsvTable grid = io::read_csv(gridp);
  io::CsvTable thin;
  thin.header = grid.header;
  for (std::size_t i = 0; i < grid.rows.size(); i += 8) thin.rows.push_back(grid.rows[i]);

  IntervalsOptions opt;
  opt.lambda = 0.0;
  opt.m = 10000;
  opt.seed = 7;
  const auto rows = run_intervals(model, thin, opt);
  double lo_sum = 0.0, hi_sum = 0.0;
  int lo_n = 0, hi_n = 0;
  for (const auto& r : rows) {
    REQUIRE(r.ok);
    const double dn = r.delta / r.normalizer;
    if (dn < 0.9) {
      lo_sum += r.width_ratio;
      ++lo_n;
    } else if (dn > 1.1) {
      hi_sum += r.width_ratio;
      ++hi_n;
    }
  }
  REQUIRE(lo_n > 20);
  REQUIRE(hi_n > 20);
  CHECK(lo_sum / lo_n < 1.0);
  CHECK(hi_sum / hi_n > 1.0);
}
