#pragma once

#include <stdexcept>
#include <string>

namespace opd {

// Bad run configuration (missing files, invalid flags). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation failed to converge or is degenerate. CLI exit code 3.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown (non-SPD covariance, solver failure). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace opd
