#include "opd/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "opd/errors.hpp"

namespace opd::loss {

PowerParameter::PowerParameter(double l) : lambda(l) {
  if (!std::isfinite(l))
    throw std::domain_error("power parameter must be finite");
}

simd::PdlBranch branch_of(double lambda) {
  if (std::abs(lambda) < kBranchTol) return simd::PdlBranch::zero;
  if (std::abs(lambda + 1.0) < kBranchTol) return simd::PdlBranch::neg_one;
  return simd::PdlBranch::general;
}

namespace {

void require_positive(double delta, double y) {
  if (!(delta > 0.0) || !(y > 0.0))
    throw std::domain_error("loss requires positive predictor and predictand");
}

}  // namespace

double pdl_loss(double delta, double y, PowerParameter lambda) {
  require_positive(delta, y);
  const double l = lambda.lambda;
  // Ratios are handled on the log scale so y/delta spanning hundreds of
  // orders of magnitude cannot overflow before the power is applied. Near
  // equality the log difference is taken through log1p, which keeps the
  // heavily cancelling loss accurate.
  const double t = std::abs(y - delta) < 0.5 * delta
                       ? std::log1p((y - delta) / delta)
                       : std::log(y) - std::log(delta);
  switch (branch_of(l)) {
    case simd::PdlBranch::zero:
      return y * t - (y - delta);
    case simd::PdlBranch::neg_one:
      return (y - delta) - delta * t;
    case simd::PdlBranch::general:
    default:
      return (y * std::expm1(l * t) + l * (delta - y)) / (l * (l + 1.0));
  }
}

LossEvaluation pdl_loss_eval(double delta, double y, PowerParameter lambda) {
  return {delta, y, pdl_loss(delta, y, lambda)};
}

double phi_plus(double x, PowerParameter lambda) {
  if (!(x >= 0.0)) throw std::domain_error("phi_plus requires x >= 0");
  const double l = lambda.lambda;
  if (x == 0.0) {
    // The generator diverges at 0 once the power drops to -1 or below.
    if (l <= -1.0 + kBranchTol)
      return std::numeric_limits<double>::infinity();
    if (branch_of(l) == simd::PdlBranch::zero) return 1.0;
    return 1.0 / (l + 1.0);
  }
  const double lx = std::log(x);
  switch (branch_of(l)) {
    case simd::PdlBranch::zero:
      return x * lx - (x - 1.0);
    case simd::PdlBranch::neg_one:
      return (x - 1.0) - lx;
    case simd::PdlBranch::general:
    default:
      // (x^{l+1} - (l+1) x + l) / (l (l+1))
      return (x * std::expm1(l * lx) + l * (1.0 - x)) / (l * (l + 1.0));
  }
}

double classical_loss(ClassicalLossKind kind, double delta, double y) {
  require_positive(delta, y);
  switch (kind.kind) {
    case ClassicalLoss::sel:
      return (delta - y) * (delta - y);
    case ClassicalLoss::ael:
      return std::abs(delta - y);
    case ClassicalLoss::arl:
      return std::abs((delta - y) / y);
    case ClassicalLoss::qtl: {
      if (!(kind.q > 0.0 && kind.q < 1.0))
        throw ConfigError("quantile loss requires q strictly inside (0,1)");
      const double d = delta - y;
      return d * ((d > 0.0 ? 1.0 : 0.0) - kind.q);
    }
  }
  throw std::logic_error("unreachable loss kind");
}

double asymmetry_pdl(double f, PowerParameter lambda) {
  if (!(f > 0.0 && f < 1.0))
    throw std::domain_error("asymmetry requires f in (0,1)");
  const double l = lambda.lambda;
  const double L = std::log1p(-f);  // log(1-f)
  switch (branch_of(l)) {
    case simd::PdlBranch::zero:
      return -(1.0 - f) * (L + f) / ((1.0 - f) * L + f);
    case simd::PdlBranch::neg_one:
      return -(1.0 - f) * ((1.0 - f) * L + f) / (L + f);
    case simd::PdlBranch::general:
    default:
      // (1-f) * ((1-f)^{-l} - 1 - l f) / ((1-f)^{l+1} - 1 + (l+1) f),
      // written with expm1 so both sides stay accurate as f -> 0.
      return (1.0 - f) * (std::expm1(-l * L) - l * f) /
             (std::expm1((l + 1.0) * L) + (l + 1.0) * f);
  }
}

double asymmetry_classical(ClassicalLossKind kind, double f) {
  if (!(f > 0.0 && f < 1.0))
    throw std::domain_error("asymmetry requires f in (0,1)");
  switch (kind.kind) {
    case ClassicalLoss::sel:
      return (1.0 - f) * (1.0 - f);
    case ClassicalLoss::ael:
    case ClassicalLoss::arl:
      return 1.0 - f;
    case ClassicalLoss::qtl:
      if (!(kind.q > 0.0 && kind.q < 1.0))
        throw ConfigError("quantile loss requires q strictly inside (0,1)");
      return (1.0 - f) * kind.q / (1.0 - kind.q);
  }
  throw std::logic_error("unreachable loss kind");
}

}  // namespace opd::loss
