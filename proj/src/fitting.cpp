#include "optomech/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/kernels.hpp"
#include "optomech/optics.hpp"

namespace optomech {

std::array<double, 4> resonance_jacobian(const ResonanceParams& r, double f) {
  const double u = f / r.f0;
  const double detune = ((r.f0 - f) * (r.f0 + f)) / (r.f0 * r.f0);  // 1 - u²
  const double width = u / r.q_eff;
  const double d = detune * detune + width * width;
  const double inv_sqrt_d = 1.0 / std::sqrt(d);
  const double amq = r.a_max / r.q_eff;
  const double inv_d32 = inv_sqrt_d / d;
  // dD/dq = -2 u² / q³;  dD/du = -4 u (1 - u²) + 2 u / q²;  du/df0 = -u / f0
  const double dd_dq = -2.0 * width * width / r.q_eff;
  const double dd_du = -4.0 * u * detune + 2.0 * u / (r.q_eff * r.q_eff);
  std::array<double, 4> j{};
  j[kAmax] = inv_sqrt_d / r.q_eff;
  j[kQ] = -amq / r.q_eff * inv_sqrt_d - 0.5 * amq * inv_d32 * dd_dq;
  j[kF0] = -0.5 * amq * inv_d32 * dd_du * (-u / r.f0);
  j[kFloor] = 1.0;
  return j;
}

const char* to_string(FitProcedure procedure) {
  switch (procedure) {
    case FitProcedure::four_param: return "four_param";
    case FitProcedure::staged_refit: return "staged_refit";
    case FitProcedure::fixed_amax_auto_f0: return "fixed_amax_auto_f0";
    case FitProcedure::fixed_amax_scan_f0: return "fixed_amax_scan_f0";
  }
  return "?";
}

FitProcedure parse_fit_procedure(const std::string& text) {
  for (FitProcedure p : {FitProcedure::four_param, FitProcedure::staged_refit, FitProcedure::fixed_amax_auto_f0,
                         FitProcedure::fixed_amax_scan_f0}) {
    if (text == to_string(p)) return p;
  }
  throw ConfigError("unknown fit procedure '" + text + "'");
}

namespace {

using Params4 = std::array<double, 4>;
using Mask4 = std::array<bool, 4>;

Params4 to_array(const ResonanceParams& r) { return {r.a_max, r.f0, r.q_eff, r.a_floor}; }
ResonanceParams from_array(const Params4& p) { return {p[kAmax], p[kF0], p[kQ], p[kFloor]}; }

bool admissible(const Params4& p) {
  return p[kAmax] >= 0.0 && p[kF0] > 0.0 && p[kQ] > 0.0 && p[kFloor] >= 0.0 &&
         std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

struct Problem {
  std::vector<double> freqs;
  std::vector<double> values;
};

double rss(const Problem& prob, const Params4& p, std::vector<double>& scratch) {
  scratch.resize(prob.freqs.size());
  kernels::resonance_curve(from_array(p), prob.freqs, scratch);
  double sum = 0.0;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    const double r = scratch[i] - prob.values[i];
    sum += r * r;
  }
  return sum;
}

struct LmResult {
  Params4 params;
  std::array<std::optional<double>, 4> sd;
  double rss;
  int iterations;
};

std::string describe(const Params4& p) {
  std::ostringstream os;
  os.precision(10);
  os << "a_max=" << p[kAmax] << " f0=" << p[kF0] << " q=" << p[kQ] << " floor=" << p[kFloor];
  return os.str();
}

// Damped Gauss-Newton with Marquardt's diagonal scaling over the free subset.
LmResult levenberg_marquardt(const Problem& prob, Params4 params, const Mask4& free, const FitOptions& opt) {
  std::vector<int> idx;
  for (int j = 0; j < 4; ++j) {
    if (free[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  const int k = static_cast<int>(idx.size());
  const auto n = static_cast<Eigen::Index>(prob.freqs.size());
  if (n <= k) throw InputError("fit: fewer bins than free parameters");

  std::vector<double> scratch;
  double cost = rss(prob, params, scratch);
  double lambda = 1e-3;
  int iterations = 0;
  bool converged = cost == 0.0;

  Eigen::MatrixXd jac(n, k);
  Eigen::VectorXd res(n);
  const auto build = [&](const Params4& p) {
    const ResonanceParams r = from_array(p);
    scratch.resize(prob.freqs.size());
    kernels::resonance_curve(r, prob.freqs, scratch);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      res(i) = scratch[ui] - prob.values[ui];
      const auto g = resonance_jacobian(r, prob.freqs[ui]);
      for (int c = 0; c < k; ++c) jac(i, c) = g[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
    }
  };

  while (!converged) {
    if (iterations >= opt.max_iterations) {
      throw FitError("fit did not converge within " + std::to_string(opt.max_iterations) + " iterations",
                     describe(params));
    }
    build(params);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * res;
    bool accepted = false;
    while (!accepted) {
      ++iterations;
      Eigen::MatrixXd a = jtj;
      for (int c = 0; c < k; ++c) a(c, c) += lambda * std::max(jtj(c, c), 1e-300);
      const Eigen::VectorXd delta = a.ldlt().solve(-grad);
      Params4 trial = params;
      double max_rel = 0.0;
      for (int c = 0; c < k; ++c) {
        const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(c)]);
        trial[j] += delta(c);
        max_rel = std::max(max_rel, std::fabs(delta(c)) / std::max(std::fabs(params[j]), 1e-300));
      }
      const double trial_cost = admissible(trial) ? rss(prob, trial, scratch) : std::numeric_limits<double>::infinity();
      if (trial_cost <= cost && std::isfinite(trial_cost)) {
        params = trial;
        const bool tiny_step = max_rel < opt.relative_tolerance;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (tiny_step || cost == 0.0) converged = true;
      } else {
        lambda *= 10.0;
        // No admissible descent direction left: we sit at the minimum to
        // within rounding.
        if (lambda > 1e20) {
          accepted = true;
          converged = true;
        }
        if (iterations >= opt.max_iterations) break;
      }
    }
  }

  build(params);
  LmResult out{params, {}, cost, iterations};
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd scale(k);
  for (int c = 0; c < k; ++c) scale(c) = jtj(c, c) > 0.0 ? 1.0 / std::sqrt(jtj(c, c)) : 1.0;
  const Eigen::MatrixXd scaled = scale.asDiagonal() * jtj * scale.asDiagonal();
  const Eigen::MatrixXd inv = scale.asDiagonal() * scaled.inverse() * scale.asDiagonal();
  const double s2 = cost / static_cast<double>(n - k);
  for (int c = 0; c < k; ++c) {
    const double var = s2 * inv(c, c);
    out.sd[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])] = var >= 0.0 ? std::sqrt(var) : std::nan("");
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

std::size_t peak_index(const Spectrum& s) {
  return static_cast<std::size_t>(std::max_element(s.amplitudes.begin(), s.amplitudes.end()) - s.amplitudes.begin());
}

std::size_t significant_bins(const Spectrum& s, double floor) {
  const double peak = s.amplitudes[peak_index(s)];
  const double threshold = 1e-3 * (peak - floor);
  return static_cast<std::size_t>(std::count_if(s.amplitudes.begin(), s.amplitudes.end(),
                                                [&](double a) { return a - floor > threshold; }));
}

Problem make_problem(const Spectrum& s) { return {s.frequencies(), s.amplitudes}; }

// Golden-section minimisation on [lo, hi].
template <class F>
double golden_section(F&& f, double lo, double hi, double tol) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < 200 && (b - a) > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

ResonanceParams initial_guess(const Spectrum& s) {
  s.validate();
  if (s.amplitudes.size() < 3) throw InputError("fit: spectrum needs at least three bins");
  const std::size_t n = s.amplitudes.size();
  const std::size_t k = peak_index(s);
  const std::size_t guard = std::max<std::size_t>(3, n / 10);
  std::vector<double> off;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + guard < k || i > k + guard) off.push_back(s.amplitudes[i]);
  }
  const double floor = off.empty() ? *std::min_element(s.amplitudes.begin(), s.amplitudes.end()) : median(off);
  ResonanceParams g;
  g.f0 = s.frequency(k);
  g.a_floor = std::max(0.0, std::min(floor, s.amplitudes[k]));
  g.a_max = s.amplitudes[k] - g.a_floor;
  const double excess = g.a_max;
  if (!(excess > 0.0) || !(g.f0 > 0.0)) throw InputError("fit: spectrum has no resonance peak above the floor");

  // Half-power points by linear interpolation.
  const double half = excess / std::sqrt(2.0);
  std::size_t left = k;
  while (left > 0 && s.amplitudes[left - 1] - g.a_floor >= half) --left;
  std::size_t right = k;
  while (right + 1 < n && s.amplitudes[right + 1] - g.a_floor >= half) ++right;
  if (right - left >= 2 && left > 0 && right + 1 < n) {
    const auto cross = [&](std::size_t inside, std::size_t outside) {
      const double ai = s.amplitudes[inside] - g.a_floor;
      const double ao = s.amplitudes[outside] - g.a_floor;
      const double frac = (ai - half) / (ai - ao);
      return s.frequency(inside) + frac * (s.frequency(outside) - s.frequency(inside));
    };
    const double width = cross(right, right + 1) - cross(left, left - 1);
    g.q_eff = g.f0 / width;
    return g;
  }

  // Narrow peak: symmetric tail pairs. With the true centre at f_k + eps,
  // A(k +- j) - floor ~ a_max f0 / (2 q (j df -+ eps)), so each pair yields
  // eps and q independently of the other.
  std::vector<double> qs;
  std::vector<double> eps;
  for (std::size_t j = 1; j <= 3; ++j) {
    if (j > k || k + j >= n) break;
    const double lo = s.amplitudes[k - j] - g.a_floor;
    const double hi = s.amplitudes[k + j] - g.a_floor;
    if (!(lo > 0.0) || !(hi > 0.0)) continue;
    const double jdf = static_cast<double>(j) * s.df;
    qs.push_back(g.a_max * g.f0 * (1.0 / lo + 1.0 / hi) / (4.0 * jdf));
    eps.push_back(jdf * (1.0 / lo - 1.0 / hi) / (1.0 / lo + 1.0 / hi));
  }
  if (qs.empty()) {
    g.q_eff = g.f0 / s.df;
    return g;
  }
  g.q_eff = median(qs);
  const double shift = median(eps);
  if (std::fabs(shift) < 0.5 * s.df) g.f0 += shift;
  return g;
}

ResonanceFit fit_resonance(const Spectrum& spectrum, FitProcedure procedure, const FitHints& hints,
                           std::optional<double> time_domain_amax, const FitOptions& options) {
  spectrum.validate();
  ResonanceParams start = initial_guess(spectrum);
  if (procedure != FitProcedure::four_param) {
    // Upper-branch spectra: floor fixed (zero by default).
    start.a_floor = hints.fixed_floor;
  }
  if (hints.f0) start.f0 = *hints.f0;
  if (hints.q_eff) start.q_eff = *hints.q_eff;
  if (hints.a_max) start.a_max = *hints.a_max;

  const bool free_f0 = procedure != FitProcedure::fixed_amax_scan_f0;
  const double floor_for_count = procedure == FitProcedure::four_param ? start.a_floor : hints.fixed_floor;
  if (free_f0 && significant_bins(spectrum, floor_for_count) < options.min_bins) {
    throw InputError("fit: fewer than " + std::to_string(options.min_bins) + " bins above the floor");
  }

  const Problem prob = make_problem(spectrum);
  ResonanceFit fit;
  fit.procedure = procedure;

  switch (procedure) {
    case FitProcedure::four_param: {
      const LmResult r = levenberg_marquardt(prob, to_array(start), {true, true, true, true}, options);
      fit.params = from_array(r.params);
      fit.sd = r.sd;
      fit.iterations = r.iterations;
      fit.residual_norm = std::sqrt(r.rss);
      break;
    }
    case FitProcedure::staged_refit: {
      if (time_domain_amax) start.a_max = *time_domain_amax;
      const LmResult first = levenberg_marquardt(prob, to_array(start), {false, true, true, false}, options);
      const LmResult second = levenberg_marquardt(prob, first.params, {true, false, true, false}, options);
      fit.params = from_array(second.params);
      fit.sd = {second.sd[kAmax], first.sd[kF0], second.sd[kQ], std::nullopt};
      fit.iterations = first.iterations + second.iterations;
      fit.residual_norm = std::sqrt(second.rss);
      break;
    }
    case FitProcedure::fixed_amax_auto_f0:
    case FitProcedure::fixed_amax_scan_f0: {
      const std::optional<double> amax = time_domain_amax ? time_domain_amax : hints.a_max;
      if (!amax) throw InputError(std::string("fit: procedure ") + to_string(procedure) + " needs a time-domain a_max");
      start.a_max = *amax;
      if (procedure == FitProcedure::fixed_amax_auto_f0) {
        const LmResult r = levenberg_marquardt(prob, to_array(start), {false, true, true, false}, options);
        fit.params = from_array(r.params);
        fit.sd = {std::nullopt, r.sd[kF0], r.sd[kQ], std::nullopt};
        fit.iterations = r.iterations;
        fit.residual_norm = std::sqrt(r.rss);
        break;
      }
      int total_iterations = 0;
      const auto q_sd = [&](double f0) {
        Params4 p = to_array(start);
        p[kF0] = f0;
        try {
          const LmResult r = levenberg_marquardt(prob, p, {false, false, true, false}, options);
          total_iterations += r.iterations;
          // Relative: an absolute sd favours whichever offset drives q down.
          if (!r.sd[kQ] || !(r.params[kQ] > 0.0)) return std::numeric_limits<double>::infinity();
          return *r.sd[kQ] / r.params[kQ];
        } catch (const FitError&) {
          return std::numeric_limits<double>::infinity();
        }
      };
      // Dense pass over +-1 bin, then golden-section refinement around the
      // best node: the objective has many local minima once the line is
      // narrower than a bin.
      const double centre = start.f0;
      constexpr int kNodes = 100;
      const double h = spectrum.df / kNodes;
      double best_f0 = centre;
      double best_sd = q_sd(centre);
      for (int i = -kNodes; i <= kNodes; ++i) {
        const double f = centre + h * static_cast<double>(i);
        const double v = q_sd(f);
        if (v < best_sd) {
          best_sd = v;
          best_f0 = f;
        }
      }
      best_f0 = golden_section(q_sd, best_f0 - h, best_f0 + h, 1e-12 * std::max(1.0, centre));
      Params4 p = to_array(start);
      p[kF0] = best_f0;
      const LmResult r = levenberg_marquardt(prob, p, {false, false, true, false}, options);
      fit.params = from_array(r.params);
      fit.sd = {std::nullopt, std::nullopt, r.sd[kQ], std::nullopt};
      fit.iterations = total_iterations + r.iterations;
      fit.residual_norm = std::sqrt(r.rss);
      break;
    }
  }
  return fit;
}

RingdownFit fit_ringdown(const TimeTrace& env, double f0_hint, const RingdownOptions& options) {
  env.validate();
  if (!(f0_hint > 0.0)) throw ConfigError("ringdown fit: f0 hint must be > 0");
  const std::size_t n = env.samples.size();
  if (n < 3) throw InputError("ringdown fit: need at least three envelope samples");
  for (double v : env.samples) {
    if (!(v > 0.0)) throw InputError("ringdown fit: envelope must be strictly positive");
  }
  // Least squares on log(env) = c - rate * t, centred for conditioning.
  double tm = 0.0;
  double ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tm += env.time_at(i);
    ym += std::log(env.samples[i]);
  }
  tm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double stt = 0.0;
  double sty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = env.time_at(i) - tm;
    stt += dt * dt;
    sty += dt * (std::log(env.samples[i]) - ym);
  }
  const double slope = sty / stt;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(env.samples[i]) - (ym + slope * (env.time_at(i) - tm));
    sse += r * r;
  }
  const double slope_sd = std::sqrt(sse / static_cast<double>(n - 2) / stt);

  RingdownFit fit{};
  fit.f0 = f0_hint;
  fit.decay_rate = -slope;
  fit.decay_rate_sd = slope_sd;
  fit.amplitude0 = std::exp(ym + slope * (env.time_at(0) - tm));
  const double omega0 = 2.0 * kPi * f0_hint;
  const double total_change = std::fabs(slope) * env.duration();
  fit.diverged = total_change < 1e-9 || std::fabs(slope) <= 3.0 * slope_sd;
  if (fit.diverged) {
    fit.q = std::numeric_limits<double>::infinity();
    return fit;
  }
  if (slope > 0.0 && !options.allow_growth) {
    std::ostringstream os;
    os << "ringdown fit: envelope grows at rate " << slope << " (negative damping, self-oscillation)";
    throw FitError(os.str());
  }
  fit.q = omega0 / (2.0 * fit.decay_rate);
  return fit;
}

}  // namespace optomech
