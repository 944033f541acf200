// opd: optimal prediction of positive-valued spatial processes under
// power-divergence loss. Subcommands: fit, predict, intervals, coverage,
// simulate, asymmetry. Exit codes: 0 success, 2 configuration error,
// 3 numerical or estimation error.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "opd/errors.hpp"
#include "opd/pipeline.hpp"
#include "opd/simd.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(opd::io::parse_double(cur, what));
      cur.clear();
    }
  };
  for (char ch : text) {
    if (ch == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(ch)))
      cur.push_back(ch);
  }
  flush();
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct CommonMc {
  double alpha = 0.05;
  std::size_t m = 100000;
  std::uint64_t seed = 42;
};

void add_mc_flags(CLI::App* cmd, CommonMc& mc) {
  cmd->add_option("--alpha", mc.alpha, "Interval level alpha in (0,1)")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  cmd->add_option("--M", mc.m, "Monte Carlo sample count (>= 1000)");
  cmd->add_option("--seed", mc.seed, "RNG seed");
}

void check_mc(const CommonMc& mc) {
  if (mc.m < 1000) throw opd::ConfigError("M must be at least 1000");
  if (mc.m < static_cast<std::size_t>(10.0 / mc.alpha))
    std::cerr << "warning: M = " << mc.m
              << " is small for alpha = " << mc.alpha
              << "; cut-off quantiles will be noisy\n";
}

struct CovariateFlags {
  std::string numeric;
  std::string categorical;
  bool x_covariate = false;
  bool no_intercept = false;

  opd::io::CovariateSpec spec() const {
    opd::io::CovariateSpec s;
    s.numeric = parse_name_list(numeric);
    s.categorical = parse_name_list(categorical);
    s.x_coordinate = x_covariate;
    s.intercept = !no_intercept;
    return s;
  }
};

void add_covariate_flags(CLI::App* cmd, CovariateFlags& cov) {
  cmd->add_option("--covariates", cov.numeric,
                  "Comma-separated numeric covariate columns");
  cmd->add_option("--categorical", cov.categorical,
                  "Comma-separated categorical covariate columns "
                  "(treatment coded, first level is baseline)");
  cmd->add_flag("--x-covariate", cov.x_covariate,
                "Include the standardized x coordinate as a covariate");
  cmd->add_flag("--no-intercept", cov.no_intercept, "Drop the intercept column");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal spatial prediction of positive-valued processes "
               "under power-divergence loss"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read key=value defaults from a file");

  // fit ----------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Estimate model parameters");
  std::string fit_data, fit_dup, fit_out = "model.txt";
  double fit_sigma2_eps = -1.0;
  CovariateFlags fit_cov;
  opd::variogram::GlsConfig gls;
  fit->add_option("--data", fit_data, "Dataset CSV (x,y,value,<covariates>)")
      ->required();
  fit->add_option("--duplicates", fit_dup, "Duplicate-pairs CSV (z1,z2)");
  fit->add_option("--sigma2-eps", fit_sigma2_eps,
                  "Measurement-error variance when no duplicates file");
  fit->add_option("--out", fit_out, "Output model file");
  add_covariate_flags(fit, fit_cov);
  fit->add_option("--bins", gls.bins.num_bins, "Semivariogram bins");
  fit->add_option("--max-lag-fraction", gls.bins.max_lag_fraction,
                  "Fraction of max distance covered by bins");
  fit->add_option("--min-pairs", gls.bins.min_pairs, "Minimum pairs per bin");
  fit->add_option("--tol", gls.tol, "GLS convergence tolerance");
  fit->add_option("--max-iter", gls.max_iter, "GLS iteration cap");

  // predict --------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Grid prediction with UQ");
  std::string pr_model, pr_grid, pr_out = "predictions.csv", pr_lambda = "0";
  std::string pr_width_grid;
  CommonMc pr_mc;
  predict->add_option("--model", pr_model, "Fitted model file")->required();
  predict->add_option("--grid", pr_grid, "Prediction grid CSV")->required();
  predict->add_option("--lambda", pr_lambda,
                      "Power parameter: number, calibrate:<q>, or select-by-width");
  predict->add_option("--width-grid", pr_width_grid,
                      "Lambda grid for select-by-width (comma separated)");
  predict->add_option("--out", pr_out, "Output CSV");
  add_mc_flags(predict, pr_mc);

  // intervals ------------------------------------------------------------
  auto* ivals = app.add_subcommand("intervals", "Conditional and unconditional intervals");
  std::string iv_model, iv_grid, iv_out = "intervals.csv";
  double iv_lambda = 0.0;
  CommonMc iv_mc;
  ivals->add_option("--model", iv_model, "Fitted model file")->required();
  ivals->add_option("--grid", iv_grid, "Prediction grid CSV")->required();
  ivals->add_option("--lambda", iv_lambda, "Power parameter");
  ivals->add_option("--out", iv_out, "Output CSV");
  add_mc_flags(ivals, iv_mc);

  // coverage ---------------------------------------------------------------
  auto* cover = app.add_subcommand("coverage", "LOOCV interval coverage");
  std::string cv_model, cv_out = "coverage.csv", cv_lambdas = "-3,-2,-1,0,1,2,3";
  std::string cv_kind = "both";
  bool cv_refit = false;
  CommonMc cv_mc;
  cover->add_option("--model", cv_model, "Fitted model file")->required();
  cover->add_option("--lambdas", cv_lambdas, "Lambda grid (comma separated)");
  cover->add_option("--kind", cv_kind, "conditional | unconditional | both");
  cover->add_flag("--loocv-refit", cv_refit,
                  "Re-estimate parameters on every leave-one-out subset (slow)");
  cover->add_option("--out", cv_out, "Output CSV");
  add_mc_flags(cover, cv_mc);

  // simulate --------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Sample the data model at given sites");
  std::string sim_sites, sim_out = "simulated.csv", sim_beta;
  CovariateFlags sim_cov;
  opd::CovarianceParams sim_theta;
  std::uint64_t sim_seed = 42;
  sim->add_option("--sites", sim_sites, "Sites CSV (x,y,<covariates>)")->required();
  sim->add_option("--beta", sim_beta, "Coefficients (comma separated)")->required();
  add_covariate_flags(sim, sim_cov);
  sim->add_option("--sigma2-eta", sim_theta.sigma2_eta, "Partial sill")->required();
  sim->add_option("--range", sim_theta.range_r, "Spherical range")->required();
  sim->add_option("--sigma2-xi", sim_theta.sigma2_xi, "Microscale variance")->required();
  sim->add_option("--sigma2-eps", sim_theta.sigma2_eps, "Measurement-error variance")
      ->required();
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "Output CSV");

  // asymmetry --------------------------------------------------------------
  auto* asym = app.add_subcommand("asymmetry", "Asymmetry curves A(f)");
  std::string as_lambdas = "-2,0,0.5,1,1.5,2,3", as_q = "0.1,0.25,0.4,0.5,0.6,0.75,0.9";
  std::string as_out = "asymmetry.csv";
  int as_fpoints = 99;
  asym->add_option("--lambdas", as_lambdas, "PDL lambda values");
  asym->add_option("--qtl-q", as_q, "Quantile-loss q values");
  asym->add_option("--f-points", as_fpoints, "Interior grid points on (0,1)");
  asym->add_option("--out", as_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit) {
      opd::pipeline::FitOptions opt;
      opt.covariates = fit_cov.spec();
      opt.gls = gls;
      if (fit_sigma2_eps >= 0.0) opt.sigma2_eps = fit_sigma2_eps;
      std::optional<opd::io::CsvTable> dup;
      if (!fit_dup.empty()) dup = opd::io::read_csv(fit_dup);
      const auto model = opd::pipeline::run_fit(opd::io::read_csv(fit_data), dup, opt);
      opd::io::write_model_file(fit_out, model);
      std::cout << "fit: " << model.iterations << " iterations, sigma2_eta="
                << model.params.theta.sigma2_eta << " range="
                << model.params.theta.range_r << " sigma2_xi="
                << model.params.theta.sigma2_xi << " sigma2_eps="
                << model.params.theta.sigma2_eps << "\n"
                << "model written to " << fit_out << "\n";
    } else if (*predict) {
      check_mc(pr_mc);
      opd::pipeline::PredictOptions opt;
      opt.lambda = opd::pipeline::parse_lambda_spec(pr_lambda);
      opt.alpha = pr_mc.alpha;
      opt.m = pr_mc.m;
      opt.seed = pr_mc.seed;
      if (!pr_width_grid.empty())
        opt.width_grid = parse_double_list(pr_width_grid, "width grid");
      const auto model = opd::io::read_model_file(pr_model);
      const auto rows =
          opd::pipeline::run_predict(model, opd::io::read_csv(pr_grid), opt);
      opd::pipeline::write_prediction_csv(pr_out, rows);
      std::size_t bad = 0;
      for (const auto& r : rows) bad += r.ok ? 0 : 1;
      std::cout << "predict: " << rows.size() - bad << " rows written";
      if (bad) std::cout << " (" << bad << " rows failed; see error column)";
      std::cout << " -> " << pr_out << "\n";
    } else if (*ivals) {
      check_mc(iv_mc);
      opd::pipeline::IntervalsOptions opt;
      opt.lambda = iv_lambda;
      opt.alpha = iv_mc.alpha;
      opt.m = iv_mc.m;
      opt.seed = iv_mc.seed;
      const auto model = opd::io::read_model_file(iv_model);
      const auto rows =
          opd::pipeline::run_intervals(model, opd::io::read_csv(iv_grid), opt);
      opd::pipeline::write_interval_csv(iv_out, rows);
      std::cout << "intervals: " << rows.size() << " rows -> " << iv_out << "\n";
    } else if (*cover) {
      check_mc(cv_mc);
      opd::pipeline::CoverageOptions opt;
      opt.lambdas = parse_double_list(cv_lambdas, "lambdas");
      opt.alpha = cv_mc.alpha;
      opt.m = cv_mc.m;
      opt.seed = cv_mc.seed;
      if (cv_kind == "conditional") {
        opt.unconditional = false;
      } else if (cv_kind == "unconditional") {
        opt.conditional = false;
      } else if (cv_kind != "both") {
        throw opd::ConfigError("unknown coverage kind: " + cv_kind);
      }
      if (cv_refit) opt.refit = opd::variogram::GlsConfig{};
      const auto model = opd::io::read_model_file(cv_model);
      const auto rows = opd::pipeline::run_coverage(model, opt);
      opd::pipeline::write_coverage_csv(cv_out, rows);
      for (const auto& r : rows)
        std::cout << "coverage " << r.kind << " lambda=" << r.lambda << ": "
                  << r.coverage << "\n";
      std::cout << "written to " << cv_out << "\n";
    } else if (*sim) {
      opd::pipeline::SimulateOptions opt;
      opt.covariates = sim_cov.spec();
      opt.beta = parse_double_list(sim_beta, "beta");
      opt.theta = sim_theta;
      opt.seed = sim_seed;
      const auto sites = opd::io::read_csv(sim_sites);
      const auto values = opd::pipeline::run_simulate(sites, opt);
      opd::pipeline::write_simulated_csv(sim_out, sites, values);
      std::cout << "simulate: " << values.size() << " values -> " << sim_out << "\n";
    } else if (*asym) {
      opd::pipeline::AsymmetryOptions opt;
      opt.lambdas = parse_double_list(as_lambdas, "lambdas");
      opt.qtl_q = parse_double_list(as_q, "qtl q");
      opt.f_points = as_fpoints;
      const auto rows = opd::pipeline::run_asymmetry(opt);
      opd::pipeline::write_asymmetry_csv(as_out, rows);
      std::cout << "asymmetry: " << rows.size() << " rows -> " << as_out << "\n";
    }
  } catch (const opd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
