#pragma once

#include <optional>
#include <string>
#include <vector>

#include "optomech/integrate.hpp"

namespace optomech {

enum class AmplitudeUnit { volt_rms, volt_peak, nanometer, meter, arbitrary };

const char* to_string(AmplitudeUnit unit);
AmplitudeUnit parse_amplitude_unit(const std::string& text);

/// Single-sided amplitude spectrum on a uniform frequency grid.
struct Spectrum {
  double f0_bin = 0.0;  // frequency of amplitudes[0], Hz
  double df = 1.0;      // bin width, Hz
  std::vector<double> amplitudes;
  AmplitudeUnit unit = AmplitudeUnit::arbitrary;
  int slope_sign = 0;   // interferometer slope sign recorded by calibration

  double frequency(std::size_t i) const { return f0_bin + static_cast<double>(i) * df; }
  std::vector<double> frequencies() const;
  void validate() const;
};

struct CalibrationConstants {
  double sensitivity_nm_per_vpp = 415.0 / 13.0;
  double amplification = 1.0;

  void validate() const;
};

enum class WindowKind { rectangular, hann };

WindowKind parse_window(const std::string& text);

struct MixOptions {
  /// Frequency of the tone being down-converted; when set, the cutoff must
  /// separate the difference and the (aliased) sum frequencies.
  std::optional<double> signal_freq;
  /// Transition width of the low-pass in Hz; defaults to half the distance
  /// between the cutoff and the nearer band edge.
  std::optional<double> transition;
};

/// Blackman-windowed sinc low-pass with unit DC gain and odd length.
std::vector<double> design_lowpass(double sample_rate, double cutoff, double transition);

/// Multiply by cos(2 pi ref t) and low-pass with a linear-phase FIR
/// (zero group delay, same sampling grid).
TimeTrace mix_and_lowpass(const TimeTrace& trace, double ref_freq, double cutoff, const MixOptions& options = {});

/// Amplitude spectrum normalised so that A cos(2 pi f t) at a bin centre reads A.
Spectrum amplitude_spectrum(const TimeTrace& trace, WindowKind window = WindowKind::rectangular,
                            AmplitudeUnit unit = AmplitudeUnit::arbitrary);

/// V_eff = 10^(L / 20)
double dbv_to_veff(double level_dbv);
double veff_to_dbv(double volts);

/// Volts (rms or peak) to nanometres: V_pp from 2 sqrt(2) V_rms or 2 V_peak,
/// then sensitivity / amplification.
Spectrum calibrate_to_displacement(const Spectrum& spectrum, const CalibrationConstants& cal, int fringe_slope_sign);

/// Centered sliding maximum of |x| over `window` time units.
TimeTrace envelope(const TimeTrace& trace, double window);

}  // namespace optomech
