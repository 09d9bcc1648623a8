#pragma once

#include <cstddef>
#include <vector>

namespace optomech {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K
inline constexpr double kPi = 3.14159265358979323846;

/// Low-finesse fibre interferometer (two-beam fringe).
struct InterferometerParams {
  double wavelength = 830e-9;  // m
  double visibility = 1.0;
  double mean_intensity = 1.0;
  double r1 = 0.04;  // fibre-end reflectivity
  double r2 = 1.0;   // cantilever reflectivity

  void validate() const;
};

/// Parameters of the delayed photothermal back-action (effective-Q formula).
struct PhotothermalParams {
  double q0 = 31000.0;
  double c_z = 2.8;       // cantilever spring constant, N/m
  double kappa = 1.0;     // optical spring constant per watt, c_ph = kappa * P
  double tau = 1e-6;      // photothermal delay, s
  double omega0 = 1.0;    // rad/s
  double omega_m = 1.0;   // rad/s

  void validate() const;
};

struct NoiseParams {
  double amplitude = 1e-9;  // m
  double bandwidth = 1.0;   // Hz
  double temperature = 10.0;
  double f0 = 74083.0;      // Hz
  double q = 31000.0;
  double c_l = 2.8;         // N/m
  double boltzmann = kBoltzmann;

  void validate() const;
};

struct FringeSample {
  double intensity;
  double slope;  // dI/dD
};

/// I(D) = I0 (1 + V cos(4 pi D / lambda)) and its exact derivative.
FringeSample fringe_intensity(const InterferometerParams& params, double distance);

/// Fabry-Perot finesse pi (R1 R2)^(1/4) / (1 - (R1 R2)^(1/2)).
/// Throws DomainError unless 0 < r1 r2 < 1.
double finesse(double r1, double r2);

enum class DampingRegime { damped, critical, self_oscillating };

struct EffectiveQ {
  double q_eff;      // signed; infinite at the critical power
  double inverse_q;  // 1 / Q_eff
  DampingRegime regime;
};

/// 1/Q_eff = 1/Q0 - (kappa P / c_z) omega0 tau / (1 + tau² omega_m²).
EffectiveQ effective_q(const PhotothermalParams& params, double power);

/// Power at which 1/Q_eff crosses zero. Infinite when kappa <= 0.
double critical_power(const PhotothermalParams& params);

/// Frequency-modulation thermal noise (1/A) sqrt(kB T B f0 / (pi Q c_L)), in Hz.
double thermal_frequency_noise(const NoiseParams& params);

struct LissajousParams {
  InterferometerParams interferometer;
  double mean_inverse_q = 1.0 / 31000.0;
  std::size_t samples = 256;
};

struct LissajousPoint {
  double slope;
  double inverse_q;
};

enum class LissajousShape { line, oval };

struct LissajousCurve {
  std::vector<LissajousPoint> points;  // closed: last point repeats the first
  LissajousShape shape;
  double enclosed_area;  // shoelace area in (slope, 1/Q) units
};

/// Trace (dI/dD(x0), 1/Q(x0)) over one fringe period. 1/Q follows the
/// normalized slope shifted by `phase_offset`; zero offset gives a line,
/// pi/2 the maximal oval.
LissajousCurve lissajous_curve(double phase_offset, double q_modulation_depth,
                               const LissajousParams& params);

}  // namespace optomech
