#pragma once

#include <array>
#include <optional>
#include <string>

#include "optomech/dsp.hpp"
#include "optomech/integrate.hpp"
#include "optomech/resonance.hpp"

namespace optomech {

enum class FitProcedure {
  four_param,          // all of a_max, f0, q, floor free
  staged_refit,        // (f0, q) with a_max preset, then (a_max, q) with f0 frozen
  fixed_amax_auto_f0,  // a_max fixed from the time domain; (f0, q) free
  fixed_amax_scan_f0,  // a_max fixed; f0 scanned to minimise the q uncertainty; q free
};

const char* to_string(FitProcedure procedure);
FitProcedure parse_fit_procedure(const std::string& text);

struct FitHints {
  std::optional<double> a_max;
  std::optional<double> f0;
  std::optional<double> q_eff;
  /// Floor used when it is not a free parameter (all procedures except
  /// four_param); defaults to zero.
  double fixed_floor = 0.0;
};

struct FitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  std::size_t min_bins = 5;
};

struct ResonanceFit {
  ResonanceParams params;
  /// Standard deviations in ResonanceIndex order; empty for fixed parameters.
  std::array<std::optional<double>, 4> sd;
  FitProcedure procedure = FitProcedure::four_param;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Deterministic starting point: f0 at the max bin, floor from the median of
/// off-peak bins, a_max = peak - floor, q from the half-power width (or the
/// peak tails when the peak is narrower than a bin).
ResonanceParams initial_guess(const Spectrum& spectrum);

ResonanceFit fit_resonance(const Spectrum& spectrum, FitProcedure procedure, const FitHints& hints = {},
                           std::optional<double> time_domain_amax = std::nullopt, const FitOptions& options = {});

struct RingdownFit {
  double q;           // omega0 / (2 decay_rate); infinite for a flat envelope, negative when growing
  double f0;
  double amplitude0;  // fitted envelope at the first sample
  double decay_rate;  // 1/time; positive for decay
  double decay_rate_sd;
  bool diverged;      // flat envelope: Q indistinguishable from infinity
};

struct RingdownOptions {
  /// Accept growing envelopes and report a negative Q instead of throwing.
  bool allow_growth = false;
};

/// Log-linear regression of a strictly positive envelope.
RingdownFit fit_ringdown(const TimeTrace& envelope, double f0_hint, const RingdownOptions& options = {});

}  // namespace optomech
