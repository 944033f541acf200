#pragma once

#include <cstddef>
#include <vector>

namespace opd::stats {

// Standard-normal quantile: Acklam's rational approximation polished with one
// Halley step against erfc, giving near machine precision.
double norm_quantile(double p);

double norm_cdf(double x);

// Empirical quantile with type-7 (linear) interpolation of the order
// statistics. Sorts a copy; p in [0, 1].
double quantile_type7(std::vector<double> x, double p);

// Same, for data already sorted ascending.
double quantile_type7_sorted(const std::vector<double>& x, double p);

double mean(const double* x, std::size_t n);
// Unbiased sample variance (divisor n-1); n >= 2.
double variance(const double* x, std::size_t n);

}  // namespace opd::stats
