#include "optomech/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "optomech/detail/sliding_max.hpp"
#include "optomech/errors.hpp"
#include "optomech/random.hpp"

namespace optomech {
namespace {

std::size_t step_count(double duration, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integration: dt must be finite and > 0");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("integration: duration must be finite and > 0");
  }
  return static_cast<std::size_t>(std::llround(duration / dt));
}

[[noreturn]] void diverged(const State& s) {
  std::ostringstream os;
  os << "integration diverged at t=" << s.t << " (x=" << s.x << ", v=" << s.v << ")";
  throw DivergenceError(os.str(), s.t);
}

// One classical RK4 step; f(state, stage_time) -> Derivative.
template <class F>
State rk4_step(const F& f, const State& s, double t, double dt) {
  const double h2 = 0.5 * dt;
  const double h6 = dt / 6.0;
  const double th = t + 0.5 * dt;
  const Derivative k1 = f(State{t, s.x, s.v, s.f_ph});
  const Derivative k2 = f(State{th, s.x + h2 * k1.dx, s.v + h2 * k1.dv, s.f_ph + h2 * k1.df_ph});
  const Derivative k3 = f(State{th, s.x + h2 * k2.dx, s.v + h2 * k2.dv, s.f_ph + h2 * k2.df_ph});
  const Derivative k4 = f(State{t + dt, s.x + dt * k3.dx, s.v + dt * k3.dv, s.f_ph + dt * k3.df_ph});
  State n;
  n.x = s.x + h6 * (((k1.dx + 2.0 * k2.dx) + 2.0 * k3.dx) + k4.dx);
  n.v = s.v + h6 * (((k1.dv + 2.0 * k2.dv) + 2.0 * k3.dv) + k4.dv);
  n.f_ph = s.f_ph + h6 * (((k1.df_ph + 2.0 * k2.df_ph) + 2.0 * k3.df_ph) + k4.df_ph);
  return n;
}

// Integrates and returns every sample (undecimated) plus the final state.
template <class F>
Integration run_fixed_step(const F& f, const State& initial, std::size_t steps, double dt, std::size_t decimation,
                           double limit, std::vector<double>* full) {
  if (decimation == 0) throw ConfigError("integration: decimation must be >= 1");
  Integration out;
  out.trace.t0 = initial.t;
  out.trace.dt = dt * static_cast<double>(decimation);
  out.trace.samples.reserve(steps / decimation + 1);
  if (full) full->reserve(steps + 1);
  State s = initial;
  out.trace.samples.push_back(s.x);
  if (full) full->push_back(s.x);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = initial.t + static_cast<double>(i) * dt;
    State n = rk4_step(f, s, t, dt);
    n.t = initial.t + static_cast<double>(i + 1) * dt;
    if (!(std::fabs(n.x) <= limit) || !(std::fabs(n.v) <= limit)) diverged(n);
    s = n;
    if ((i + 1) % decimation == 0) out.trace.samples.push_back(s.x);
    if (full) full->push_back(s.x);
  }
  out.final_state = s;
  return out;
}

}  // namespace

void TimeTrace::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("trace: dt must be finite and > 0");
  if (samples.empty()) throw InputError("trace: no samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw InputError("trace: non-finite sample");
  }
}

SweepSchedule::SweepSchedule(std::vector<std::pair<double, double>> breakpoints)
    : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.size() < 2) throw ConfigError("schedule: need at least two breakpoints");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const auto [t, p] = breakpoints_[i];
    if (!std::isfinite(t) || !std::isfinite(p)) throw ConfigError("schedule: breakpoints must be finite");
    if (p < 0.0) throw ConfigError("schedule: p must be >= 0");
    if (i > 0 && !(t > breakpoints_[i - 1].first)) {
      throw ConfigError("schedule: breakpoint times must be strictly increasing");
    }
  }
}

double SweepSchedule::p_at(double t) const {
  if (t <= breakpoints_.front().first) return breakpoints_.front().second;
  if (t >= breakpoints_.back().first) return breakpoints_.back().second;
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t,
                                   [](double value, const auto& bp) { return value < bp.first; });
  const auto& [t1, p1] = *it;
  const auto& [t0, p0] = *(it - 1);
  return p0 + (p1 - p0) * ((t - t0) / (t1 - t0));
}

SweepSchedule SweepSchedule::up_down(double p_max, double p_final, double ramp, double top_hold,
                                     double final_hold) {
  return SweepSchedule({{0.0, 0.0},
                        {ramp, p_max},
                        {ramp + top_hold, p_max},
                        {2.0 * ramp, p_final},
                        {2.0 * ramp + final_hold, p_final}});
}

double default_step(double omega_fast) { return 2.0 * kPi / (100.0 * omega_fast); }

void check_step(double dt, double omega_fast) {
  if (omega_fast > 0.0 && dt > (2.0 * kPi / omega_fast) / 50.0) {
    std::ostringstream os;
    os << "integration: dt=" << dt << " exceeds 1/50 of the shortest period (" << 2.0 * kPi / omega_fast << ")";
    throw ConfigError(os.str());
  }
}

Integration integrate_with_state(const Rhs& rhs, const State& initial, double duration, double dt,
                                 const IntegrationOptions& options) {
  const std::size_t steps = step_count(duration, dt);
  check_step(dt, options.omega_fast);
  return run_fixed_step(rhs, initial, steps, dt, options.decimation, options.divergence_limit, nullptr);
}

TimeTrace integrate(const Rhs& rhs, const State& initial, double duration, double dt,
                    const IntegrationOptions& options) {
  return integrate_with_state(rhs, initial, duration, dt, options).trace;
}

std::pair<double, double> random_initial_condition(std::uint64_t seed, double range) {
  Rng rng(seed);
  const auto uniform = [&rng, range] { return range * (2.0 * rng.uniform() - 1.0); };
  const double x = uniform();
  const double v = uniform();
  return {x, v};
}

SweepRecord run_sweep(const OscillatorParams& params, const SweepSchedule& schedule, std::uint64_t seed, double dt,
                      const SweepOptions& options) {
  if (schedule.breakpoints().size() < 2) throw ConfigError("sweep: schedule is empty");
  PolynomialRhs rhs(params, options.mode);
  check_step(dt, rhs.fastest_frequency());
  const std::size_t steps = step_count(schedule.end() - schedule.start(), dt);
  const auto [x0, v0] = random_initial_condition(seed, options.initial_range);
  const State initial{schedule.start(), x0, v0, 0.0};

  const auto f = [&rhs, &schedule](const State& s) { return rhs(s, schedule.p_at(s.t)); };
  std::vector<double> full;
  Integration run = run_fixed_step(f, initial, steps, dt, options.decimation, options.divergence_limit, &full);

  const std::size_t window =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(2.0 * kPi / params.omega0 / dt)));
  const std::vector<double> env = detail::sliding_max_abs(full, window, false);

  SweepRecord record;
  record.trace = std::move(run.trace);
  record.trace.source = "sweep x";
  record.p_of_t.t0 = record.envelope.t0 = record.trace.t0;
  record.p_of_t.dt = record.envelope.dt = record.trace.dt;
  record.p_of_t.source = "sweep p";
  record.envelope.source = "sweep envelope";
  for (std::size_t i = 0; i < full.size(); i += options.decimation) {
    record.p_of_t.samples.push_back(schedule.p_at(initial.t + static_cast<double>(i) * dt));
    record.envelope.samples.push_back(env[i]);
  }
  return record;
}

TimeTrace run_ringdown(const PhysicalModelParams& params, double initial_amplitude, double duration, double dt,
                       std::size_t decimation) {
  PhysicalRhs rhs(params);
  const double fringe_period = params.fringe.wavelength / 2.0;
  if (!(std::fabs(initial_amplitude) <= 0.01 * fringe_period)) {
    throw ConfigError("ringdown: initial amplitude must stay within 1% of the fringe period");
  }
  check_step(dt, rhs.fastest_frequency());
  const double x_eq = rhs.static_equilibrium();
  const double x0 = x_eq + initial_amplitude;
  const State initial{0.0, x0, 0.0, rhs.steady_force(x0)};
  Integration run = run_fixed_step(rhs, initial, step_count(duration, dt), dt, decimation, 1e6, nullptr);
  for (double& x : run.trace.samples) x -= x_eq;
  run.trace.source = "physical ringdown";
  return std::move(run.trace);
}

TimeTrace run_ringdown(const OscillatorParams& params, DampingMode mode, double p, double initial_amplitude,
                       double duration, double dt, std::size_t decimation) {
  SweepControl{p}.validate();
  PolynomialRhs rhs(params, mode);
  check_step(dt, rhs.fastest_frequency());
  const State initial{0.0, initial_amplitude, 0.0, 0.0};
  const auto f = [&rhs, p](const State& s) { return rhs(s, p); };
  Integration run = run_fixed_step(f, initial, step_count(duration, dt), dt, decimation, 1e6, nullptr);
  run.trace.source = "polynomial ringdown";
  return std::move(run.trace);
}

}  // namespace optomech
