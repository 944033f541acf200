// Derivative-free simplex minimizer with box projection; used for the
// low-dimensional semivariogram WLS fit.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace opd::detail {

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, const std::vector<double>& lo,
    const std::vector<double>& hi, int max_eval = 20000, double ftol = 1e-13) {
  const std::size_t n = x0.size();
  auto proj = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  };

  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };

  double typical = 0.0;
  for (double v : x0) typical += std::abs(v);
  typical = typical / static_cast<double>(n) + 1e-6;

  std::vector<std::vector<double>> sx;
  sx.push_back(proj(x0));
  for (std::size_t i = 0; i < n; ++i) {
    auto x = x0;
    x[i] = (x[i] != 0.0) ? x[i] * 1.3 : 0.1 * typical;
    sx.push_back(proj(x));
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(sx[i]);

  bool converged = false;
  while (evals < max_eval) {
    // order ascending by fv
    std::vector<std::size_t> idx(n + 1);
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> sx2;
    std::vector<double> fv2;
    for (std::size_t i = 0; i <= n; ++i) {
      sx2.push_back(sx[idx[i]]);
      fv2.push_back(fv[idx[i]]);
    }
    sx.swap(sx2);
    fv.swap(fv2);

    if (std::abs(fv[n] - fv[0]) <= ftol * (std::abs(fv[0]) + ftol)) {
      converged = true;
      break;
    }
    double spread = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mnj = sx[0][j], mxj = sx[0][j];
      for (std::size_t i = 1; i <= n; ++i) {
        mnj = std::min(mnj, sx[i][j]);
        mxj = std::max(mxj, sx[i][j]);
      }
      spread = std::max(spread, (mxj - mnj) / (std::abs(sx[0][j]) + 1e-12));
    }
    if (spread < 1e-10) {
      converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += sx[i][j] / static_cast<double>(n);

    auto combine = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + coef * (centroid[j] - sx[n][j]);
      return proj(x);
    };

    auto xr = combine(1.0);
    double fr = eval(xr);
    if (fr < fv[0]) {
      auto xe = combine(2.0);
      double fe = eval(xe);
      if (fe < fr) {
        sx[n] = xe;
        fv[n] = fe;
      } else {
        sx[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      sx[n] = xr;
      fv[n] = fr;
    } else {
      auto xc = combine(-0.5);
      double fc = eval(xc);
      if (fc < fv[n]) {
        sx[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) sx[i][j] = sx[0][j] + 0.5 * (sx[i][j] - sx[0][j]);
          sx[i] = proj(sx[i]);
          fv[i] = eval(sx[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return {sx[best], fv[best], evals, converged};
}

}  // namespace opd::detail
