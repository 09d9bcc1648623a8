#include "optomech/slowflow.hpp"

#include <algorithm>
#include <cmath>

#include "optomech/errors.hpp"

namespace optomech {
namespace {

double bracket_slope(double gamma3, double gamma5, double a) {
  return gamma3 * a / 2.0 + gamma5 * a * a * a / 2.0;
}

// Newton polish of a root of h on A, keeping it if it improves the residual.
double polish(double gamma3, double gamma5, double p, double a) {
  for (int i = 0; i < 4; ++i) {
    const double h = averaged_bracket(gamma3, gamma5, p, a);
    const double dh = bracket_slope(gamma3, gamma5, a);
    if (dh == 0.0) break;
    const double next = a - h / dh;
    if (!(next > 0.0) ||
        std::fabs(averaged_bracket(gamma3, gamma5, p, next)) >= std::fabs(h)) {
      break;
    }
    a = next;
  }
  return a;
}

}  // namespace

const char* to_string(BifurcationKind kind) {
  switch (kind) {
    case BifurcationKind::subcritical: return "subcritical";
    case BifurcationKind::supercritical: return "supercritical";
    case BifurcationKind::degenerate: return "degenerate";
  }
  return "?";
}

double averaged_bracket(double gamma3, double gamma5, double p, double a) {
  const double a2 = a * a;
  return (1.0 - p) + gamma3 * a2 / 4.0 + gamma5 * a2 * a2 / 8.0;
}

double slow_flow_rate(double gamma3, double gamma5, double p, double a, double linear_damping) {
  return -(linear_damping / 2.0) * a * averaged_bracket(gamma3, gamma5, p, a);
}

std::vector<BranchPoint> steady_amplitudes(double gamma3, double gamma5, double p) {
  std::vector<BranchPoint> out;
  out.push_back({p, 0.0, p < 1.0, false});

  // Roots in s = A²: (g5/8) s² + (g3/4) s + (1 - p) = 0.
  std::vector<double> squares;
  const double qa = gamma5 / 8.0;
  const double qb = gamma3 / 4.0;
  const double qc = 1.0 - p;
  bool double_root = false;
  if (qa == 0.0) {
    if (qb != 0.0) squares.push_back(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc == 0.0) {
      squares.push_back(-qb / (2.0 * qa));
      double_root = true;
    } else if (disc > 0.0) {
      // Cancellation-free pair.
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (qb + std::copysign(sq, qb));
      squares.push_back(q / qa);
      if (q != 0.0) squares.push_back(qc / q);
    }
  }

  for (double s : squares) {
    if (!(s > 0.0) || !std::isfinite(s)) continue;
    const double a = polish(gamma3, gamma5, p, std::sqrt(s));
    const bool stable = !double_root && bracket_slope(gamma3, gamma5, a) > 0.0;
    out.push_back({p, a, stable, double_root});
  }
  std::sort(out.begin() + 1, out.end(), [](const BranchPoint& l, const BranchPoint& r) { return l.amplitude < r.amplitude; });
  return out;
}

FoldPoint fold_point(double gamma3, double gamma5) {
  if (!(gamma3 < 0.0 && gamma5 > 0.0)) {
    throw DomainError("fold_point: a fold of limit cycles requires gamma3 < 0 < gamma5");
  }
  // Double root of the quadratic in A²: s = -g3/g5, zero discriminant.
  return {1.0 - gamma3 * gamma3 / (8.0 * gamma5), std::sqrt(-gamma3 / gamma5)};
}

BifurcationSummary classify(double gamma3, double gamma5) {
  BifurcationSummary summary;
  summary.hopf_p = 1.0;
  if (gamma3 < 0.0 && gamma5 > 0.0) {
    const FoldPoint fold = fold_point(gamma3, gamma5);
    summary.kind = BifurcationKind::subcritical;
    summary.fold_p = fold.p;
    summary.fold_amplitude = fold.amplitude;
  } else if (gamma3 > 0.0 && gamma5 >= 0.0) {
    summary.kind = BifurcationKind::supercritical;
  } else if (gamma3 == 0.0 && gamma5 > 0.0) {
    summary.kind = BifurcationKind::supercritical;
  } else {
    // Branch bends back without saturating (or no nonlinearity at all).
    summary.kind = BifurcationKind::degenerate;
  }
  return summary;
}

std::vector<BranchPoint> branch_diagram(double gamma3, double gamma5, double p_min, double p_max, std::size_t n) {
  std::vector<BranchPoint> rows;
  if (n == 0 || p_min > p_max) return rows;
  std::optional<FoldPoint> fold;
  if (gamma3 < 0.0 && gamma5 > 0.0) fold = fold_point(gamma3, gamma5);
  bool fold_emitted = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = n == 1 ? p_min : p_min + (p_max - p_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    if (fold && !fold_emitted && fold->p >= p_min && fold->p <= p_max && fold->p <= p) {
      if (fold->p < p) rows.push_back({fold->p, fold->amplitude, false, true});
      fold_emitted = true;
    }
    for (const BranchPoint& b : steady_amplitudes(gamma3, gamma5, p)) rows.push_back(b);
  }
  if (fold && !fold_emitted && fold->p >= p_min && fold->p <= p_max) {
    rows.push_back({fold->p, fold->amplitude, false, true});
  }
  return rows;
}

}  // namespace optomech
