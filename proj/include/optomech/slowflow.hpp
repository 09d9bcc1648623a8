#pragma once

#include <optional>
#include <vector>

namespace optomech {

// Averaged amplitude dynamics of
//   x'' + (omega0/q0)(1 - p + g3 x² + g5 x⁴) x' + omega0² x = 0.
// Energy balance over one cycle of x = A cos(theta) gives
//   A' = -(omega0 / (2 q0)) A h(A),   h(A) = (1 - p) + g3 A²/4 + g5 A⁴/8.

struct BranchPoint {
  double p;
  double amplitude;
  bool stable;
  bool fold = false;  // double root where stable and unstable cycles merge
};

enum class BifurcationKind { subcritical, supercritical, degenerate };

const char* to_string(BifurcationKind kind);

struct BifurcationSummary {
  double hopf_p = 1.0;
  std::optional<double> fold_p;
  std::optional<double> fold_amplitude;
  BifurcationKind kind = BifurcationKind::supercritical;
};

struct FoldPoint {
  double p;
  double amplitude;
};

/// h(A), the cycle-averaged damping bracket.
double averaged_bracket(double gamma3, double gamma5, double p, double amplitude);

/// Slow-flow rate A' for the given linear damping omega0/q0.
double slow_flow_rate(double gamma3, double gamma5, double p, double amplitude, double linear_damping);

/// All steady amplitudes at p, ascending, starting with A = 0. Stability of a
/// nonzero root comes from the sign of h'(A); A = 0 is stable iff p < 1.
/// A double root (exactly at the fold) is reported once, as unstable.
std::vector<BranchPoint> steady_amplitudes(double gamma3, double gamma5, double p);

/// Saddle-node of limit cycles. Requires gamma3 < 0 < gamma5, otherwise
/// throws DomainError.
FoldPoint fold_point(double gamma3, double gamma5);

BifurcationSummary classify(double gamma3, double gamma5);

/// Steady amplitudes on n evenly spaced p values in [p_min, p_max]. For a
/// subcritical system the fold row is inserted (flagged unstable) when it
/// falls inside the range. Empty if n == 0 or p_min > p_max.
std::vector<BranchPoint> branch_diagram(double gamma3, double gamma5, double p_min, double p_max, std::size_t n);

}  // namespace optomech
