#include "opd/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "opd/errors.hpp"

namespace opd::io {

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int require_col(const CsvTable& t, const std::string& name, const std::string& what) {
  const int c = t.col(name);
  if (c < 0) throw ConfigError(what + ": missing column '" + name + "'");
  return c;
}

}  // namespace

SpatialDataset assemble_dataset(const CsvTable& table, DesignInfo& info, bool fit) {
  const int cx = require_col(table, "x", "dataset");
  const int cy = require_col(table, "y", "dataset");
  const int cv = require_col(table, "value", "dataset");
  const std::size_t n = table.rows.size();
  if (n == 0) throw ConfigError("dataset: no rows");

  SpatialDataset data;
  data.locations.resize(n);
  data.values.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    data.locations[i] = {parse_double(table.rows[i][cx], "dataset x"),
                         parse_double(table.rows[i][cy], "dataset y")};
    data.values[static_cast<Eigen::Index>(i)] =
        parse_double(table.rows[i][cv], "dataset value");
  }

  if (fit) {
    info.levels.clear();
    for (const auto& cat : info.spec.categorical) {
      const int c = require_col(table, cat, "dataset");
      std::set<std::string> uniq;
      for (const auto& row : table.rows) uniq.insert(row[c]);
      if (uniq.size() < 2)
        throw ConfigError("categorical covariate '" + cat + "' has a single level");
      info.levels[cat] = std::vector<std::string>(uniq.begin(), uniq.end());
    }
    if (info.spec.x_coordinate) {
      double mean = 0.0;
      for (const auto& loc : data.locations) mean += loc.x;
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (const auto& loc : data.locations) ss += (loc.x - mean) * (loc.x - mean);
      info.x_mean = mean;
      info.x_sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 1.0;
      if (!(info.x_sd > 0.0)) info.x_sd = 1.0;
    }
    info.names.clear();
    if (info.spec.intercept) info.names.push_back("intercept");
    for (const auto& name : info.spec.numeric) info.names.push_back(name);
    for (const auto& cat : info.spec.categorical) {
      const auto& lv = info.levels.at(cat);
      for (std::size_t k = 1; k < lv.size(); ++k)
        info.names.push_back(cat + "_" + lv[k]);
    }
    if (info.spec.x_coordinate) info.names.push_back("x_std");
  }

  const Eigen::Index p = static_cast<Eigen::Index>(info.names.size());
  data.covariates.resize(static_cast<Eigen::Index>(n), p);
  data.covariate_names = info.names;

  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index j = 0;
    if (info.spec.intercept) data.covariates(i, j++) = 1.0;
    for (const auto& name : info.spec.numeric) {
      const int c = require_col(table, name, "dataset");
      data.covariates(i, j++) = parse_double(table.rows[i][c], "covariate " + name);
    }
    for (const auto& cat : info.spec.categorical) {
      const int c = require_col(table, cat, "dataset");
      const auto& lv = info.levels.at(cat);
      const std::string& val = table.rows[i][c];
      if (std::find(lv.begin(), lv.end(), val) == lv.end())
        throw ConfigError("dataset: unseen level '" + val + "' of '" + cat + "'");
      for (std::size_t k = 1; k < lv.size(); ++k)
        data.covariates(i, j++) = (val == lv[k]) ? 1.0 : 0.0;
    }
    if (info.spec.x_coordinate)
      data.covariates(i, j++) = (data.locations[i].x - info.x_mean) / info.x_sd;
  }
  data.validate();
  return data;
}

std::vector<GridPoint> assemble_grid(const CsvTable& table, const DesignInfo& info) {
  const int cx = require_col(table, "x", "grid");
  const int cy = require_col(table, "y", "grid");
  std::vector<GridPoint> out(table.rows.size());
  const Eigen::Index p = static_cast<Eigen::Index>(info.names.size());

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    GridPoint& g = out[i];
    try {
      g.s = {parse_double(table.rows[i][cx], "grid x"),
             parse_double(table.rows[i][cy], "grid y")};
      g.x0.resize(p);
      Eigen::Index j = 0;
      if (info.spec.intercept) g.x0[j++] = 1.0;
      for (const auto& name : info.spec.numeric) {
        const int c = require_col(table, name, "grid");
        g.x0[j++] = parse_double(table.rows[i][c], "grid covariate " + name);
      }
      for (const auto& cat : info.spec.categorical) {
        const int c = require_col(table, cat, "grid");
        const auto& lv = info.levels.at(cat);
        const std::string& val = table.rows[i][c];
        if (std::find(lv.begin(), lv.end(), val) == lv.end())
          throw ConfigError("unseen level '" + val + "' of '" + cat + "'");
        for (std::size_t k = 1; k < lv.size(); ++k)
          g.x0[j++] = (val == lv[k]) ? 1.0 : 0.0;
      }
      if (info.spec.x_coordinate) g.x0[j++] = (g.s.x - info.x_mean) / info.x_sd;
    } catch (const std::exception& e) {
      g.ok = false;
      g.error = e.what();
    }
  }
  return out;
}

DuplicatePairs read_duplicates(const CsvTable& table) {
  const int c1 = require_col(table, "z1", "duplicates");
  const int c2 = require_col(table, "z2", "duplicates");
  DuplicatePairs dup;
  for (const auto& row : table.rows)
    dup.pairs.emplace_back(parse_double(row[c1], "duplicates z1"),
                           parse_double(row[c2], "duplicates z2"));
  return dup;
}

void write_model_file(const std::string& path, const ModelFile& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open model file for writing: " + path);
  out << "# opd fitted model, version 1\n";
  out << "[params]\n";
  out << "sigma2_eta=" << fmt_full(model.params.theta.sigma2_eta) << "\n";
  out << "range=" << fmt_full(model.params.theta.range_r) << "\n";
  out << "sigma2_xi=" << fmt_full(model.params.theta.sigma2_xi) << "\n";
  out << "sigma2_eps=" << fmt_full(model.params.theta.sigma2_eps) << "\n";
  out << "iterations=" << model.iterations << "\n";
  out << "converged=" << (model.converged ? 1 : 0) << "\n";

  out << "[design]\n";
  out << "intercept=" << (model.design.spec.intercept ? 1 : 0) << "\n";
  out << "numeric=";
  for (std::size_t i = 0; i < model.design.spec.numeric.size(); ++i)
    out << (i ? "," : "") << model.design.spec.numeric[i];
  out << "\n";
  out << "categorical=";
  for (std::size_t i = 0; i < model.design.spec.categorical.size(); ++i) {
    const auto& cat = model.design.spec.categorical[i];
    out << (i ? ";" : "") << cat << ":";
    const auto& lv = model.design.levels.at(cat);
    for (std::size_t k = 0; k < lv.size(); ++k) out << (k ? "|" : "") << lv[k];
  }
  out << "\n";
  out << "x_coordinate=" << (model.design.spec.x_coordinate ? 1 : 0) << "\n";
  out << "x_mean=" << fmt_full(model.design.x_mean) << "\n";
  out << "x_sd=" << fmt_full(model.design.x_sd) << "\n";

  out << "[beta]\n";
  for (Eigen::Index k = 0; k < model.params.beta.size(); ++k) {
    const double se = k < static_cast<Eigen::Index>(model.beta_se.size())
                          ? model.beta_se[static_cast<std::size_t>(k)]
                          : 0.0;
    out << model.design.names[static_cast<std::size_t>(k)] << " "
        << fmt_full(model.params.beta[k]) << " " << fmt_full(se) << " "
        << fmt_full(model.params.beta[k] - 1.96 * se) << " "
        << fmt_full(model.params.beta[k] + 1.96 * se) << "\n";
  }

  out << "[trace]\n";
  for (const auto& rec : model.trace)
    out << rec.iteration << " " << fmt_full(rec.delta_beta) << " "
        << fmt_full(rec.sigma2_eta) << " " << fmt_full(rec.range) << " "
        << fmt_full(rec.nugget) << "\n";

  out << "[semivariogram]\n";
  for (const auto& bin : model.semivariogram.bins)
    out << fmt_full(bin.lag) << " " << fmt_full(bin.gamma) << " "
        << bin.pair_count << "\n";

  out << "[data]\n";
  out << "x y value";
  for (const auto& name : model.design.names) out << " " << name;
  out << "\n";
  for (Eigen::Index i = 0; i < model.data.n(); ++i) {
    out << fmt_full(model.data.locations[static_cast<std::size_t>(i)].x) << " "
        << fmt_full(model.data.locations[static_cast<std::size_t>(i)].y) << " "
        << fmt_full(model.data.values[i]);
    for (Eigen::Index j = 0; j < model.data.p(); ++j)
      out << " " << fmt_full(model.data.covariates(i, j));
    out << "\n";
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty() || !s.empty()) out.push_back(cur);
  return out;
}

}  // namespace

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  ModelFile model;
  std::string line, section;
  std::map<std::string, std::string> params;
  std::vector<std::vector<std::string>> data_rows;
  std::vector<std::string> data_header;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section == "params" || section == "design") {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("model file: malformed line '" + line + "'");
      params[section + "." + line.substr(0, eq)] = line.substr(eq + 1);
    } else if (section == "beta") {
      const auto f = split(line, ' ');
      if (f.size() < 3) throw ConfigError("model file: malformed beta line");
      model.design.names.push_back(f[0]);
      const Eigen::Index k = model.params.beta.size();
      model.params.beta.conservativeResize(k + 1);
      model.params.beta[k] = parse_double(f[1], "model beta");
      model.beta_se.push_back(parse_double(f[2], "model beta se"));
    } else if (section == "trace") {
      const auto f = split(line, ' ');
      if (f.size() != 5) throw ConfigError("model file: malformed trace line");
      model.trace.push_back({static_cast<int>(parse_double(f[0], "trace")),
                             parse_double(f[1], "trace"), parse_double(f[2], "trace"),
                             parse_double(f[3], "trace"), parse_double(f[4], "trace")});
    } else if (section == "semivariogram") {
      const auto f = split(line, ' ');
      if (f.size() != 3) throw ConfigError("model file: malformed semivariogram line");
      model.semivariogram.bins.push_back(
          {parse_double(f[0], "semivariogram"), parse_double(f[1], "semivariogram"),
           static_cast<std::size_t>(parse_double(f[2], "semivariogram"))});
    } else if (section == "data") {
      if (data_header.empty())
        data_header = split(line, ' ');
      else
        data_rows.push_back(split(line, ' '));
    } else {
      throw ConfigError("model file: unknown section '" + section + "'");
    }
  }

  auto get = [&](const std::string& key) -> const std::string& {
    auto it = params.find(key);
    if (it == params.end())
      throw ConfigError("model file: missing key '" + key + "'");
    return it->second;
  };

  model.params.theta.sigma2_eta = parse_double(get("params.sigma2_eta"), "model");
  model.params.theta.range_r = parse_double(get("params.range"), "model");
  model.params.theta.sigma2_xi = parse_double(get("params.sigma2_xi"), "model");
  model.params.theta.sigma2_eps = parse_double(get("params.sigma2_eps"), "model");
  model.iterations = static_cast<int>(parse_double(get("params.iterations"), "model"));
  model.converged = get("params.converged") == "1";

  model.design.spec.intercept = get("design.intercept") == "1";
  if (const auto& s = get("design.numeric"); !s.empty())
    model.design.spec.numeric = split(s, ',');
  if (const auto& s = get("design.categorical"); !s.empty()) {
    for (const auto& item : split(s, ';')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigError("model file: malformed categorical spec");
      const std::string cat = item.substr(0, colon);
      model.design.spec.categorical.push_back(cat);
      model.design.levels[cat] = split(item.substr(colon + 1), '|');
    }
  }
  model.design.spec.x_coordinate = get("design.x_coordinate") == "1";
  model.design.x_mean = parse_double(get("design.x_mean"), "model");
  model.design.x_sd = parse_double(get("design.x_sd"), "model");

  if (data_header.size() < 3) throw ConfigError("model file: missing data section");
  const std::size_t n = data_rows.size();
  const std::size_t p = model.design.names.size();
  if (data_header.size() != 3 + p)
    throw ConfigError("model file: data header does not match design");
  model.data.locations.resize(n);
  model.data.values.resize(static_cast<Eigen::Index>(n));
  model.data.covariates.resize(static_cast<Eigen::Index>(n),
                               static_cast<Eigen::Index>(p));
  model.data.covariate_names = model.design.names;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = data_rows[i];
    if (f.size() != 3 + p) throw ConfigError("model file: malformed data row");
    model.data.locations[i] = {parse_double(f[0], "model data"),
                               parse_double(f[1], "model data")};
    model.data.values[static_cast<Eigen::Index>(i)] = parse_double(f[2], "model data");
    for (std::size_t j = 0; j < p; ++j)
      model.data.covariates(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j)) =
          parse_double(f[3 + j], "model data");
  }
  model.data.validate();
  return model;
}

}  // namespace opd::io
