#include "opd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "opd/errors.hpp"
#include "opd/lognormal.hpp"
#include "opd/montecarlo.hpp"
#include "opd/parallel.hpp"
#include "opd/rng.hpp"
#include "opd/simd.hpp"

namespace opd::pipeline {

using lognormal::LogGaussianModel;
using lognormal::PredictiveLaw;

io::ModelFile run_fit(const io::CsvTable& data,
                      const std::optional<io::CsvTable>& duplicates,
                      const FitOptions& options) {
  io::ModelFile model;
  model.design.spec = options.covariates;
  model.data = io::assemble_dataset(data, model.design, /*fit=*/true);

  double sigma2_eps;
  if (duplicates) {
    sigma2_eps = variogram::estimate_measurement_error(io::read_duplicates(*duplicates));
  } else if (options.sigma2_eps) {
    sigma2_eps = *options.sigma2_eps;
  } else {
    throw ConfigError("fit: provide a duplicates table or --sigma2-eps");
  }

  auto fit = variogram::iterative_gls_fit(model.data, sigma2_eps, options.gls);
  model.params.beta = fit.beta;
  model.params.theta = fit.theta;
  model.trace = fit.trace;
  model.semivariogram = fit.final_semivariogram;
  model.iterations = fit.iterations;
  model.converged = fit.converged;
  model.beta_se.resize(static_cast<std::size_t>(fit.beta.size()));
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k)
    model.beta_se[static_cast<std::size_t>(k)] = std::sqrt(std::max(fit.beta_cov(k, k), 0.0));
  return model;
}

LambdaSpec parse_lambda_spec(const std::string& text) {
  LambdaSpec spec;
  if (text == "select-by-width") {
    spec.mode = LambdaMode::select_by_width;
    return spec;
  }
  if (text.rfind("calibrate:", 0) == 0) {
    spec.mode = LambdaMode::calibrate;
    spec.q = io::parse_double(text.substr(10), "lambda calibrate target");
    if (!(spec.q > 0.0 && spec.q < 1.0))
      throw ConfigError("lambda calibrate target must lie in (0,1)");
    return spec;
  }
  spec.mode = LambdaMode::constant;
  spec.value = io::parse_double(text, "lambda");
  return spec;
}

namespace {

std::vector<double> default_width_grid() {
  std::vector<double> grid;
  for (int k = -6; k <= 6; ++k) grid.push_back(0.5 * k);
  return grid;
}

}  // namespace

std::vector<std::size_t> width_selection_sites(const std::vector<io::GridPoint>& grid,
                                               std::uint64_t seed) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i].ok) valid.push_back(i);
  if (valid.empty()) throw ConfigError("width selection: no valid grid points");

  double xmin = grid[valid[0]].s.x, xmax = xmin, ymin = grid[valid[0]].s.y, ymax = ymin;
  for (std::size_t i : valid) {
    xmin = std::min(xmin, grid[i].s.x);
    xmax = std::max(xmax, grid[i].s.x);
    ymin = std::min(ymin, grid[i].s.y);
    ymax = std::max(ymax, grid[i].s.y);
  }

  std::set<std::size_t> chosen;
  auto nearest = [&](double px, double py) {
    std::size_t best = valid[0];
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i : valid) {
      const double d = std::hypot(grid[i].s.x - px, grid[i].s.y - py);
      if (d < bd && chosen.count(i) == 0) {
        bd = d;
        best = i;
      }
    }
    return best;
  };

  // Centre plus the four bounding-box corners.
  chosen.insert(nearest(0.5 * (xmin + xmax), 0.5 * (ymin + ymax)));
  chosen.insert(nearest(xmin, ymin));
  chosen.insert(nearest(xmax, ymin));
  chosen.insert(nearest(xmin, ymax));
  chosen.insert(nearest(xmax, ymax));

  // Ten seeded-random distinct picks.
  PhiloxStream rng(seed, 0x5e1ec7u);
  while (chosen.size() < std::min<std::size_t>(15, valid.size()))
    chosen.insert(valid[rng.below(valid.size())]);

  return {chosen.begin(), chosen.end()};
}

std::vector<PredictionRow> run_predict(const io::ModelFile& model,
                                       const io::CsvTable& grid,
                                       const PredictOptions& options) {
  const LogGaussianModel lg(model.data, model.params);
  auto points = io::assemble_grid(grid, model.design);
  std::vector<PredictionRow> rows(points.size());

  double lambda_const = options.lambda.value;
  if (options.lambda.mode == LambdaMode::select_by_width) {
    const auto grid_sel =
        options.width_grid.empty() ? default_width_grid() : options.width_grid;
    const auto idx = width_selection_sites(points, options.seed);
    std::vector<Point> locs;
    std::vector<Eigen::VectorXd> x0s;
    for (std::size_t i : idx) {
      locs.push_back(points[i].s);
      x0s.push_back(points[i].x0);
    }
    lambda_const = intervals::select_lambda_by_width(lg, locs, x0s, grid_sel,
                                                     options.alpha, options.m,
                                                     options.seed)
                       .lambda_star;
  }

  parallel_for(points.size(), [&](std::size_t i) {
    PredictionRow& row = rows[i];
    row.s = points[i].s;
    if (!points[i].ok) {
      row.ok = false;
      row.error = points[i].error;
      return;
    }
    try {
      const PredictiveLaw law = lg.predictive_law(points[i].s, points[i].x0);
      double lambda = lambda_const;
      if (options.lambda.mode == LambdaMode::calibrate)
        lambda = lognormal::calibrate_lambda(law, options.lambda.q);
      row.lambda_used = lambda;
      row.delta = lognormal::opd_predict(law, lambda);
      row.bias = lognormal::bias(law, lambda);
      row.rmspe = lognormal::rmspe(law, lambda);
      row.elp = lognormal::elp_min(law, lambda);
      row.elj = lognormal::elj_min(law, lambda);
      row.normalizer = std::exp(law.x0_beta);
      const auto reps = intervals::draw_unconditional_replicates_reduced(
          law, options.m, options.seed, i);
      const auto [bounds, cut] =
          intervals::unconditional_interval_from(reps, lambda, options.alpha);
      row.lower = bounds.lower;
      row.upper = bounds.upper;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });
  return rows;
}

void write_prediction_csv(const std::string& path,
                          const std::vector<PredictionRow>& rows) {
  io::CsvWriter out(path,
                    {"x", "y", "lambda", "delta", "bias", "rmspe", "elp", "elj",
                     "lower", "upper", "normalizer", "delta_norm", "bias_norm",
                     "rmspe_norm", "elp_norm", "elj_norm", "width_norm", "error"});
  for (const auto& r : rows) {
    out.field(r.s.x);
    out.field(r.s.y);
    if (r.ok) {
      out.field(r.lambda_used);
      out.field(r.delta);
      out.field(r.bias);
      out.field(r.rmspe);
      out.field(r.elp);
      out.field(r.elj);
      out.field(r.lower);
      out.field(r.upper);
      out.field(r.normalizer);
      out.field(r.delta / r.normalizer);
      out.field(r.bias / r.normalizer);
      out.field(r.rmspe / r.normalizer);
      out.field(r.elp / r.normalizer);
      out.field(r.elj / r.normalizer);
      out.field((r.upper - r.lower) / r.normalizer);
      out.field(std::string());
    } else {
      for (int k = 0; k < 15; ++k) out.field(std::string());
      out.field(r.error);
    }
    out.end_row();
  }
}

std::vector<IntervalRow> run_intervals(const io::ModelFile& model,
                                       const io::CsvTable& grid,
                                       const IntervalsOptions& options) {
  const LogGaussianModel lg(model.data, model.params);
  auto points = io::assemble_grid(grid, model.design);
  std::vector<IntervalRow> rows(points.size());

  parallel_for(points.size(), [&](std::size_t i) {
    IntervalRow& row = rows[i];
    row.s = points[i].s;
    if (!points[i].ok) {
      row.ok = false;
      row.error = points[i].error;
      return;
    }
    try {
      const PredictiveLaw law = lg.predictive_law(points[i].s, points[i].x0);
      row.delta = lognormal::opd_predict(law, options.lambda);
      row.normalizer = std::exp(law.x0_beta);

      // Conditional: draws from [Y(s0)|Z]; substream 2i.
      {
        intervals::ConditionalReplicates reps;
        reps.law = law;
        reps.m = options.m;
        reps.log_y.resize(options.m);
        PhiloxStream rng(options.seed, 2 * i);
        rng.fill_normal(reps.log_y.data(), options.m);
        const double sd = std::sqrt(law.v);
        for (double& u : reps.log_y) u = law.mu + sd * u;
        reps.y.resize(options.m);
        simd::vexp(reps.log_y.data(), reps.y.data(), options.m);
        const auto [bounds, cut] =
            intervals::conditional_interval_from(reps, options.lambda, options.alpha);
        row.cond_lower = bounds.lower;
        row.cond_upper = bounds.upper;
        row.cond_cutoff = cut.value;
      }
      // Unconditional (reduced bivariate sampler); substream 2i+1.
      {
        const auto reps = intervals::draw_unconditional_replicates_reduced(
            law, options.m, options.seed, 2 * i + 1);
        const auto [bounds, cut] =
            intervals::unconditional_interval_from(reps, options.lambda, options.alpha);
        row.unc_lower = bounds.lower;
        row.unc_upper = bounds.upper;
        row.unc_cutoff = cut.value;
      }
      const double wu = row.unc_upper - row.unc_lower;
      row.width_ratio = wu > 0.0 ? (row.cond_upper - row.cond_lower) / wu : 0.0;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });
  return rows;
}

void write_interval_csv(const std::string& path,
                        const std::vector<IntervalRow>& rows) {
  io::CsvWriter out(path, {"x", "y", "delta", "normalizer", "cond_lower",
                           "cond_upper", "cond_width", "cond_cutoff", "unc_lower",
                           "unc_upper", "unc_width", "unc_cutoff", "width_ratio",
                           "delta_norm", "unc_width_norm", "error"});
  for (const auto& r : rows) {
    out.field(r.s.x);
    out.field(r.s.y);
    if (r.ok) {
      out.field(r.delta);
      out.field(r.normalizer);
      out.field(r.cond_lower);
      out.field(r.cond_upper);
      out.field(r.cond_upper - r.cond_lower);
      out.field(r.cond_cutoff);
      out.field(r.unc_lower);
      out.field(r.unc_upper);
      out.field(r.unc_upper - r.unc_lower);
      out.field(r.unc_cutoff);
      out.field(r.width_ratio);
      out.field(r.delta / r.normalizer);
      out.field((r.unc_upper - r.unc_lower) / r.normalizer);
      out.field(std::string());
    } else {
      for (int k = 0; k < 13; ++k) out.field(std::string());
      out.field(r.error);
    }
    out.end_row();
  }
}

std::vector<CoverageRow> run_coverage(const io::ModelFile& model,
                                      const CoverageOptions& options) {
  std::vector<CoverageRow> rows;
  intervals::LoocvOptions lo;
  lo.alpha = options.alpha;
  lo.m = options.m;
  lo.seed = options.seed;
  lo.refit = options.refit;
  lo.refit_sigma2_eps = model.params.theta.sigma2_eps;

  const auto run_kind = [&](intervals::IntervalKind kind, const char* name) {
    lo.kind = kind;
    const auto res = intervals::loocv_coverage_grid(model.data, model.params,
                                                    options.lambdas, lo);
    for (std::size_t k = 0; k < options.lambdas.size(); ++k)
      rows.push_back({options.lambdas[k], name, res.coverage[k],
                      res.per_site[k].size()});
  };
  if (options.conditional) run_kind(intervals::IntervalKind::conditional, "conditional");
  if (options.unconditional)
    run_kind(intervals::IntervalKind::unconditional, "unconditional");
  return rows;
}

void write_coverage_csv(const std::string& path,
                        const std::vector<CoverageRow>& rows) {
  io::CsvWriter out(path, {"lambda", "kind", "coverage", "sites"});
  for (const auto& r : rows) {
    out.field(r.lambda);
    out.field(r.kind);
    out.field(r.coverage);
    out.field(static_cast<long long>(r.sites));
    out.end_row();
  }
}

std::vector<double> run_simulate(const io::CsvTable& sites,
                                 const SimulateOptions& options) {
  io::DesignInfo design;
  design.spec = options.covariates;

  // A positive placeholder "value" column lets the dataset assembler run on
  // site tables that do not carry measurements.
  io::CsvTable table = sites;
  if (!table.has("value")) {
    table.header.push_back("value");
    for (auto& row : table.rows) row.push_back("1");
  }
  SpatialDataset data = io::assemble_dataset(table, design, /*fit=*/true);

  if (static_cast<Eigen::Index>(options.beta.size()) != data.p())
    throw ConfigError("simulate: beta length does not match the design");
  options.theta.validate();

  const Eigen::Index n = data.n();
  const Eigen::VectorXd beta =
      Eigen::Map<const Eigen::VectorXd>(options.beta.data(), data.p());
  const double s2w = options.theta.sigma2_w();

  Eigen::MatrixXd sigma_w = variogram::sigma_ztilde_matrix(options.theta, data.locations);
  sigma_w.diagonal().array() -= options.theta.sigma2_eps;
  const Eigen::MatrixXd l = variogram::cholesky_with_jitter(sigma_w).matrixL();

  PhiloxStream rng(options.seed, 0);
  Eigen::VectorXd field(n), noise(n);
  rng.fill_normal(field.data(), static_cast<std::size_t>(n));
  rng.fill_normal(noise.data(), static_cast<std::size_t>(n));

  const Eigen::VectorXd w = data.covariates * beta - 0.5 * s2w * Eigen::VectorXd::Ones(n) + l * field;
  const double eps_sd = std::sqrt(options.theta.sigma2_eps);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    values[static_cast<std::size_t>(i)] =
        std::exp(w[i] - 0.5 * options.theta.sigma2_eps + eps_sd * noise[i]);
  return values;
}

void write_simulated_csv(const std::string& path, const io::CsvTable& sites,
                         const std::vector<double>& values) {
  if (sites.rows.size() != values.size())
    throw ConfigError("simulate: row/value count mismatch");
  std::vector<std::string> header = sites.header;
  const bool had_value = sites.has("value");
  if (!had_value) header.push_back("value");
  io::CsvWriter out(path, header);
  const int vcol = sites.col("value");
  for (std::size_t i = 0; i < sites.rows.size(); ++i) {
    for (std::size_t j = 0; j < sites.rows[i].size(); ++j) {
      if (static_cast<int>(j) == vcol) {
        out.field_full(values[i]);
      } else {
        out.field(sites.rows[i][j]);
      }
    }
    if (!had_value) out.field_full(values[i]);
    out.end_row();
  }
}

std::vector<AsymmetryRow> run_asymmetry(const AsymmetryOptions& options) {
  if (options.f_points < 1) throw ConfigError("asymmetry: need f_points >= 1");
  std::vector<AsymmetryRow> rows;
  const auto f_of = [&](int k) {
    return static_cast<double>(k) / static_cast<double>(options.f_points + 1);
  };
  for (double lambda : options.lambdas)
    for (int k = 1; k <= options.f_points; ++k)
      rows.push_back({"pdl", lambda, f_of(k), loss::asymmetry_pdl(f_of(k), lambda)});
  for (double q : options.qtl_q)
    for (int k = 1; k <= options.f_points; ++k)
      rows.push_back({"qtl", q, f_of(k),
                      loss::asymmetry_classical({loss::ClassicalLoss::qtl, q}, f_of(k))});
  const auto classical = [&](const char* name, loss::ClassicalLoss kind) {
    for (int k = 1; k <= options.f_points; ++k)
      rows.push_back({name, 0.0, f_of(k),
                      loss::asymmetry_classical({kind, 0.5}, f_of(k))});
  };
  if (options.sel) classical("sel", loss::ClassicalLoss::sel);
  if (options.ael) classical("ael", loss::ClassicalLoss::ael);
  if (options.arl) classical("arl", loss::ClassicalLoss::arl);
  return rows;
}

void write_asymmetry_csv(const std::string& path,
                         const std::vector<AsymmetryRow>& rows) {
  io::CsvWriter out(path, {"loss", "param", "f", "asymmetry"});
  for (const auto& r : rows) {
    out.field(r.loss);
    out.field(r.param);
    out.field(r.f);
    out.field(r.value);
    out.end_row();
  }
}

}  // namespace opd::pipeline
