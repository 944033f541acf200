// Power-divergence loss family, the classical losses, and the multiplicative
// asymmetry measure A(f).
//
// The power-divergence loss of a positive prediction delta against a positive
// outcome y is indexed by a real power parameter lambda; the lambda = 0 and
// lambda = -1 members are the analytic limits of the general formula, and the
// family is continuous and convex in (delta, y).
#pragma once

#include <limits>

#include "opd/simd.hpp"

namespace opd::loss {

// Power parameter of the divergence family. Any finite real; values within
// 1e-12 of 0 or -1 are evaluated on the corresponding limit branch to avoid
// the 1/(lambda*(lambda+1)) blow-up.
struct PowerParameter {
  double lambda;
  PowerParameter(double l = 0.0);  // throws std::domain_error if not finite
};

inline constexpr double kBranchTol = 1e-12;

simd::PdlBranch branch_of(double lambda);

// One evaluated loss, kept with its operands.
struct LossEvaluation {
  double predictor;
  double predictand;
  double value;
};

enum class ClassicalLoss { sel, ael, arl, qtl };

struct ClassicalLossKind {
  ClassicalLoss kind;
  double q = 0.5;  // only meaningful for qtl; must lie strictly in (0,1)
};

// L_PDL(delta, y; lambda); delta, y > 0.
double pdl_loss(double delta, double y, PowerParameter lambda);

LossEvaluation pdl_loss_eval(double delta, double y, PowerParameter lambda);

// The convex generator: phi_plus(x) >= 0 with equality only at x = 1, and
// pdl_loss(delta, y, lambda) == delta * phi_plus(y / delta, lambda).
// x = 0 diverges for lambda <= -1 and returns +infinity.
double phi_plus(double x, PowerParameter lambda);

double classical_loss(ClassicalLossKind kind, double delta, double y);

// Asymmetry A(f) = L((1-f) y, y) / L(y / (1-f), y) for f in (0,1): the ratio
// of the loss of f x 100% multiplicative under-prediction to the matching
// over-prediction. Values > 1 mean under-prediction costs more.
double asymmetry_pdl(double f, PowerParameter lambda);

double asymmetry_classical(ClassicalLossKind kind, double f);

}  // namespace opd::loss
