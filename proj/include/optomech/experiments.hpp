#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "optomech/fitting.hpp"
#include "optomech/integrate.hpp"
#include "optomech/model.hpp"
#include "optomech/optics.hpp"

namespace optomech {

enum class SweepDirection { up, down };
const char* to_string(SweepDirection direction);

struct HysteresisPoint {
  SweepDirection direction = SweepDirection::up;
  double control = 0.0;
  double amplitude = 0.0;  // mean envelope over the final 10% of the dwell
  double q_eff = 0.0;      // NaN when the probe could not be fitted
  bool settled = true;     // drift over the final 20% of the dwell <= 1%
};

struct HysteresisCurve {
  std::vector<HysteresisPoint> up_branch;    // ascending control
  std::vector<HysteresisPoint> down_branch;  // descending control, starting at the top of the grid
  std::optional<double> jump_up;
  std::optional<double> jump_down;
  std::string model;
  std::string schedule;
  std::uint64_t seed = 0;
};

struct HysteresisOptions {
  DampingMode mode = DampingMode::quintic;
  double dt = 0.0;               // 0 selects default_step
  double initial_range = 1e-3;
  bool measure_q = true;
  double probe_fraction = 0.5;   // probe length as a fraction of the dwell
  double kick = 1e-2;            // lower-branch ring-down start amplitude
  double perturbation = 0.05;    // relative upper-branch perturbation
  double lower_branch_limit = 0.1;  // amplitudes below this are probed by ring-down
  double divergence_limit = 1e6;
};

/// Step p up through the grid and back down, integrating `dwell_time` at each
/// value with the state carried over. One curve per seed; seeds run as lanes
/// of a single batch.
std::vector<HysteresisCurve> hysteresis_experiments(const OscillatorParams& params, std::span<const double> p_grid,
                                                    double dwell_time, std::span<const std::uint64_t> seeds,
                                                    const HysteresisOptions& options = {});

HysteresisCurve hysteresis_experiment(const OscillatorParams& params, std::span<const double> p_grid,
                                      double dwell_time, std::uint64_t seed, const HysteresisOptions& options = {});

/// First consecutive pair with an amplitude ratio above `ratio`, reported as
/// the midpoint of the pair. Branches are taken in sweep order.
std::pair<std::optional<double>, std::optional<double>> detect_jumps(std::span<const HysteresisPoint> up_branch,
                                                                     std::span<const HysteresisPoint> down_branch,
                                                                     double ratio = 5.0);

/// Integral of (A_down² - A_up²) over the control values both branches share
/// (trapezoid rule). Positive for a subcritical loop.
double loop_area(const HysteresisCurve& curve);

// ---- batches of fixed-p oscillators -----------------------------------------

struct SettleRequest {
  OscillatorParams params;
  DampingMode mode = DampingMode::quintic;
  double p = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
};

struct SettleResult {
  double amplitude;  // mean per-period max |x| over the final 10%
  bool settled;
  bool diverged;
};

/// Integrate every request for `duration` as one data-parallel batch.
std::vector<SettleResult> settle_batch(std::span<const SettleRequest> requests, double duration, double dt = 0.0);

struct FoldScan {
  double estimate;        // midpoint between the highest collapsed and lowest surviving p
  double lowest_survivor;
  double highest_collapse;
};

/// Locate the lower end of the upper branch by starting lanes at the fold
/// amplitude on a p grid of spacing `step` centred on `p_centre`.
FoldScan fold_scan(const OscillatorParams& params, double p_centre, double step, int half_width, double duration,
                   double dt = 0.0);

// ---- sweep read-outs ----------------------------------------------------------

/// Control value at the first time the envelope exceeds `threshold`.
std::optional<double> sweep_onset(const SweepRecord& record, double threshold = 0.5);

/// Mean envelope over [t_begin, t_end].
double mean_envelope(const SweepRecord& record, double t_begin, double t_end);

// ---- inverse-Q linearity ---------------------------------------------------------

struct LinearityScan {
  std::vector<double> power;
  std::vector<double> inverse_q;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS deviation from the fitted line
  std::optional<double> zero_crossing;
};

/// Least-squares line through (P, 1/Q_eff) pairs.
LinearityScan fit_inverse_q_line(std::vector<double> power, std::vector<double> inverse_q);

/// 1/Q_eff from the closed-form effective Q.
LinearityScan qeff_linearity_scan(const PhotothermalParams& params, std::span<const double> powers);

struct PhysicalRingdown {
  double q;
  RingdownFit fit;
  TimeTrace envelope;
};

struct RingdownProtocol {
  double initial_amplitude = 0.004;  // must stay within 1% of the fringe period
  double decay_times = 2.0;          // duration in units of 2 Q_eff / omega0 (estimated)
  double min_duration = 200.0;       // in units of 1/omega0
  double dt = 0.0;                   // 0 selects default_step
};

/// Free decay of the physical model about its static equilibrium, fitted on
/// the per-period maximum of |x|. `q_estimate` sizes the record.
PhysicalRingdown measure_physical_q(const PhysicalModelParams& params, double q_estimate,
                                    const RingdownProtocol& protocol = {});

/// 1/Q_eff from physical-model ring-downs, with the photothermal amplitude
/// set to force_per_watt * P.
LinearityScan qeff_linearity_scan(const PhysicalModelParams& base, double force_per_watt,
                                  std::span<const double> powers, const RingdownProtocol& protocol = {});

}  // namespace optomech
