// The batch operations behind the CLI subcommands: fit, grid prediction with
// uncertainty quantification, interval tables, LOOCV coverage, simulation,
// and asymmetry curves. Kept out of main() so they are directly testable.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opd/intervals.hpp"
#include "opd/model_io.hpp"
#include "opd/types.hpp"
#include "opd/variogram.hpp"

namespace opd::pipeline {

struct FitOptions {
  io::CovariateSpec covariates;
  variogram::GlsConfig gls;
  // Supplied measurement-error variance; required when no duplicates table.
  std::optional<double> sigma2_eps;
};

io::ModelFile run_fit(const io::CsvTable& data,
                      const std::optional<io::CsvTable>& duplicates,
                      const FitOptions& options);

enum class LambdaMode { constant, calibrate, select_by_width };

struct LambdaSpec {
  LambdaMode mode = LambdaMode::constant;
  double value = 0.0;  // constant lambda
  double q = 0.5;      // calibrate target quantile
};

// Accepts "<number>", "calibrate:<q>", or "select-by-width".
LambdaSpec parse_lambda_spec(const std::string& text);

struct PredictOptions {
  LambdaSpec lambda;
  double alpha = 0.05;
  std::size_t m = 100000;
  std::uint64_t seed = 42;
  std::vector<double> width_grid;  // select-by-width grid; default -3..3 step 0.5
};

struct PredictionRow {
  Point s;
  bool ok = true;
  std::string error;
  double lambda_used = 0.0;
  double delta = 0.0;
  double bias = 0.0;
  double rmspe = 0.0;
  double elp = 0.0;
  double elj = 0.0;
  double lower = 0.0;   //
  double upper = 0.0;   // unconditional (1 - alpha) interval
  double normalizer = 0.0;  // exp(x(s0)' beta)
};

std::vector<PredictionRow> run_predict(const io::ModelFile& model,
                                       const io::CsvTable& grid,
                                       const PredictOptions& options);

void write_prediction_csv(const std::string& path,
                          const std::vector<PredictionRow>& rows);

struct IntervalsOptions {
  double lambda = 0.0;
  double alpha = 0.05;
  std::size_t m = 100000;
  std::uint64_t seed = 42;
};

struct IntervalRow {
  Point s;
  bool ok = true;
  std::string error;
  double delta = 0.0;
  double normalizer = 0.0;
  double cond_lower = 0.0, cond_upper = 0.0, cond_cutoff = 0.0;
  double unc_lower = 0.0, unc_upper = 0.0, unc_cutoff = 0.0;
  double width_ratio = 0.0;  // conditional width / unconditional width
};

std::vector<IntervalRow> run_intervals(const io::ModelFile& model,
                                       const io::CsvTable& grid,
                                       const IntervalsOptions& options);

void write_interval_csv(const std::string& path,
                        const std::vector<IntervalRow>& rows);

struct CoverageOptions {
  std::vector<double> lambdas = {-3, -2, -1, 0, 1, 2, 3};
  double alpha = 0.05;
  std::size_t m = 100000;
  std::uint64_t seed = 42;
  bool conditional = true;
  bool unconditional = true;
  std::optional<variogram::GlsConfig> refit;  // re-estimate per left-out site
};

struct CoverageRow {
  double lambda = 0.0;
  std::string kind;
  double coverage = 0.0;
  std::size_t sites = 0;
};

std::vector<CoverageRow> run_coverage(const io::ModelFile& model,
                                      const CoverageOptions& options);

void write_coverage_csv(const std::string& path,
                        const std::vector<CoverageRow>& rows);

struct SimulateOptions {
  io::CovariateSpec covariates;
  std::vector<double> beta;  // must match the assembled design
  CovarianceParams theta;    // includes sigma2_eps
  std::uint64_t seed = 42;
};

// Samples one realization of the data model at the sites in `sites`
// (columns x,y,<covariates>) and returns the positive measurements.
std::vector<double> run_simulate(const io::CsvTable& sites,
                                 const SimulateOptions& options);

void write_simulated_csv(const std::string& path, const io::CsvTable& sites,
                         const std::vector<double>& values);

struct AsymmetryOptions {
  std::vector<double> lambdas;
  std::vector<double> qtl_q;
  bool sel = true;
  bool ael = true;
  bool arl = true;
  int f_points = 99;  // f = k/(f_points+1), k = 1..f_points
};

struct AsymmetryRow {
  std::string loss;
  double param = 0.0;
  double f = 0.0;
  double value = 0.0;
};

std::vector<AsymmetryRow> run_asymmetry(const AsymmetryOptions& options);

void write_asymmetry_csv(const std::string& path,
                         const std::vector<AsymmetryRow>& rows);

// The reproducible site selection used by select-by-width: the grid point
// nearest the domain centre, the four nearest the bounding-box corners, and
// ten seeded-random distinct picks.
std::vector<std::size_t> width_selection_sites(const std::vector<io::GridPoint>& grid,
                                               std::uint64_t seed);

}  // namespace opd::pipeline
