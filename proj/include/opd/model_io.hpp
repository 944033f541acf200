// The fitted-model file: plug-in parameters, the covariate design (including
// categorical levels and the x-coordinate standardisation), the embedded
// design matrix and data, the fit trace, and the final empirical
// semivariogram. Written with full precision; self-contained for prediction.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opd/csv.hpp"
#include "opd/types.hpp"
#include "opd/variogram.hpp"

namespace opd::io {

struct CovariateSpec {
  std::vector<std::string> numeric;      // numeric covariate columns
  std::vector<std::string> categorical;  // categorical columns (treatment coded)
  bool x_coordinate = false;             // include standardized x coordinate
  bool intercept = true;
};

// The design actually fitted: expansion rules frozen at fit time.
struct DesignInfo {
  CovariateSpec spec;
  // Per categorical column: sorted distinct levels; the first is baseline.
  std::map<std::string, std::vector<std::string>> levels;
  double x_mean = 0.0;
  double x_sd = 1.0;
  std::vector<std::string> names;  // final design column names
};

// Builds the design matrix from a data CSV (columns x,y,value,<covariates>).
// When `fit` is true the expansion rules (levels, standardisation) are
// derived from this table and stored in `info`; otherwise `info` must hold
// the fit-time rules.
SpatialDataset assemble_dataset(const CsvTable& table, DesignInfo& info, bool fit);

struct GridPoint {
  Point s;
  Eigen::VectorXd x0;
  bool ok = true;
  std::string error;
};

// Expands grid rows (columns x,y,<covariates>) with fit-time rules. Rows that
// fail (unparseable numbers, unseen categorical level) come back with
// ok = false and a message; the run continues.
std::vector<GridPoint> assemble_grid(const CsvTable& table, const DesignInfo& info);

struct ModelFile {
  ModelParams params;  // beta and theta (theta carries sigma2_eps)
  DesignInfo design;
  SpatialDataset data;
  std::vector<double> beta_se;  // sqrt diag (X' Sigma^-1 X)^-1
  std::vector<variogram::GlsIterationRecord> trace;
  variogram::EmpiricalSemivariogram semivariogram;
  int iterations = 0;
  bool converged = false;
};

void write_model_file(const std::string& path, const ModelFile& model);
ModelFile read_model_file(const std::string& path);

DuplicatePairs read_duplicates(const CsvTable& table);

}  // namespace opd::io
