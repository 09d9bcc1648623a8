#pragma once

#include <functional>
#include <string>

#include "optomech/optics.hpp"

namespace optomech {

/// Coefficients of the polynomial equation of motion. Damping coefficients are
/// stored in the scaled form, i.e. the damping bracket reads
/// (omega0/q0) (1 - p + gamma3 x² + gamma5 x⁴).
struct OscillatorParams {
  double omega0 = 1.0;
  double q0 = 10.0;
  double omega_m = 1.0;
  double gamma3 = 0.0;
  double gamma5 = 0.0;
  double alpha3 = 0.0;
  double alpha5 = 0.0;
  double f_m = 0.0;   // drive half-amplitude
  double phi0 = 0.0;  // drive phase

  void validate() const;
  double linear_damping() const { return omega0 / q0; }
};

/// Unscaled damping coefficients, gamma_i = (omega0/q0) * gamma_tilde_i.
struct UnscaledDamping {
  double gamma3;
  double gamma5;
};

UnscaledDamping unscaled_damping(const OscillatorParams& params);
OscillatorParams with_unscaled_damping(OscillatorParams params, double gamma3, double gamma5);

struct SweepControl {
  double p = 0.0;

  void validate() const;
};

enum class DampingMode { vdp, quintic, general };

DampingMode parse_damping_mode(const std::string& text);
const char* to_string(DampingMode mode);

struct PhysicalModelParams {
  double mass = 1.0;     // kg
  double omega0 = 1.0;   // rad/s
  double q0 = 100.0;
  double tau = 1.0;      // photothermal delay, s
  double f_rad = 0.0;    // constant radiation-pressure force, N
  double photothermal_amplitude = 0.0;  // peak steady photothermal force, N
  InterferometerParams fringe{1.0, 1.0, 1.0, 0.04, 1.0};
  double working_point = 0.125;  // cavity-length offset within the fringe, m
  double fringe_phase = 0.0;     // phase of the force relative to the intensity

  void validate() const;
  double spring_constant() const { return mass * omega0 * omega0; }
};

struct State {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
  double f_ph = 0.0;  // photothermal force; unused by polynomial models
};

struct Derivative {
  double dx = 0.0;
  double dv = 0.0;
  double df_ph = 0.0;
};

using Rhs = std::function<Derivative(const State&)>;

/// Right-hand side of the polynomial model with the sweep parameter supplied
/// per evaluation (p may follow a schedule).
class PolynomialRhs {
 public:
  PolynomialRhs(const OscillatorParams& params, DampingMode mode);

  Derivative operator()(const State& s, double p) const;
  const OscillatorParams& params() const { return params_; }
  DampingMode mode() const { return mode_; }
  /// Largest natural angular frequency, used for step-size checks.
  double fastest_frequency() const;

 private:
  OscillatorParams params_;
  DampingMode mode_;
  double damping_, g3_, g5_, a3_, a5_, wm2_;
};

Rhs build_polynomial_rhs(const OscillatorParams& params, SweepControl control, DampingMode mode);

/// Unit-peak raised-sine fringe: (1 + V cos(4 pi D / lambda + phase)) / (1 + V).
double normalized_fringe(const InterferometerParams& fringe, double distance, double phase);
double normalized_fringe_slope(const InterferometerParams& fringe, double distance, double phase);

/// Cantilever with a delayed photothermal force:
///   x' = v
///   v' = -(omega0/q0) v - omega0² x + (f_rad + f_ph) / m
///   f_ph' = (F_ss(x) - f_ph) / tau,  F_ss(x) = amplitude * fringe(working_point + x)
class PhysicalRhs {
 public:
  explicit PhysicalRhs(const PhysicalModelParams& params);

  Derivative operator()(const State& s) const;
  const PhysicalModelParams& params() const { return params_; }

  double steady_force(double x) const;
  double steady_force_slope(double x) const;
  /// Static displacement where omega0² x m = f_rad + F_ss(x).
  double static_equilibrium() const;
  /// Optical spring constant c_ph = -dF_ss/dx at the static equilibrium, the
  /// sign convention under which positive c_ph reduces the damping.
  double optical_spring_constant() const;
  double fastest_frequency() const;

 private:
  PhysicalModelParams params_;
};

Rhs build_physical_rhs(const PhysicalModelParams& params);

/// Effective-Q parameters equivalent to a physical model whose photothermal
/// amplitude scales as force_per_watt * P.
PhotothermalParams photothermal_equivalent(const PhysicalModelParams& params, double force_per_watt);

}  // namespace optomech
