#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optomech/model.hpp"

namespace optomech {

/// Uniformly sampled signal.
struct TimeTrace {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> samples;
  std::string source;

  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double duration() const {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) * dt;
  }
  /// Throws InputError if dt <= 0, the trace is empty or any sample is non-finite.
  void validate() const;
};

/// Piecewise-linear p(t) through (time, p) breakpoints; held constant
/// outside the covered interval.
class SweepSchedule {
 public:
  SweepSchedule() = default;
  explicit SweepSchedule(std::vector<std::pair<double, double>> breakpoints);

  double p_at(double t) const;
  double start() const { return breakpoints_.front().first; }
  double end() const { return breakpoints_.back().first; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return breakpoints_; }

  /// Ramp 0 -> p_max, hold, ramp down to p_final, hold. Each leg lasts
  /// `ramp` time units except the short hold at p_max.
  static SweepSchedule up_down(double p_max, double p_final, double ramp = 5000.0,
                               double top_hold = 1000.0, double final_hold = 5000.0);

 private:
  std::vector<std::pair<double, double>> breakpoints_;
};

struct SweepRecord {
  TimeTrace trace;    // x
  TimeTrace p_of_t;   // applied p
  TimeTrace envelope; // trailing one-period max of |x|
};

struct IntegrationOptions {
  std::size_t decimation = 1;       // keep every n-th sample
  double divergence_limit = 1e6;    // |x| or |v| beyond this aborts
  double omega_fast = 0.0;          // > 0 enables the step-size check
};

struct Integration {
  TimeTrace trace;
  State final_state;
};

/// Default step: 100 steps per period of the fastest frequency.
double default_step(double omega_fast);

/// Throws ConfigError unless dt <= (2 pi / omega_fast) / 50.
void check_step(double dt, double omega_fast);

/// Fixed-step classical RK4. Sample i is taken at initial.t + i * dt.
Integration integrate_with_state(const Rhs& rhs, const State& initial, double duration, double dt,
                                 const IntegrationOptions& options = {});

TimeTrace integrate(const Rhs& rhs, const State& initial, double duration, double dt,
                    const IntegrationOptions& options = {});

struct SweepOptions {
  DampingMode mode = DampingMode::quintic;
  double initial_range = 1e-3;  // x, v drawn uniformly from +-initial_range
  std::size_t decimation = 1;
  double divergence_limit = 1e6;
};

/// Integrate the polynomial model with p = schedule(t) applied at every RK4
/// stage, from a seeded random initial condition.
SweepRecord run_sweep(const OscillatorParams& params, const SweepSchedule& schedule, std::uint64_t seed,
                      double dt, const SweepOptions& options = {});

/// Uniform doubles in [-range, range] from a 64-bit Mersenne twister; the
/// conversion is done by hand so that the sequence is identical on every
/// standard library.
std::pair<double, double> random_initial_condition(std::uint64_t seed, double range);

/// Free decay of the physical model from x = x_eq + A0 (x_eq the static
/// equilibrium), v = 0, f_ph = F_ss(x). The returned samples are measured
/// from x_eq.
TimeTrace run_ringdown(const PhysicalModelParams& params, double initial_amplitude, double duration,
                       double dt, std::size_t decimation = 1);

/// Free decay of the polynomial model at fixed p from (x = A0, v = 0).
TimeTrace run_ringdown(const OscillatorParams& params, DampingMode mode, double p,
                       double initial_amplitude, double duration, double dt,
                       std::size_t decimation = 1);

}  // namespace optomech
