#include "optomech/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "optomech/detail/rk4_common.hpp"
#include "optomech/errors.hpp"

namespace optomech {
namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError(what);
  }
}

[[noreturn]] void non_finite_state(const State& s) {
  std::ostringstream os;
  os << "non-finite state at t=" << s.t << " (x=" << s.x << ", v=" << s.v << ", f_ph=" << s.f_ph << ")";
  throw EvaluationError(os.str());
}

}  // namespace

void OscillatorParams::validate() const {
  require_finite({omega0, q0, omega_m, gamma3, gamma5, alpha3, alpha5, f_m, phi0},
                 "oscillator: all coefficients must be finite");
  if (!(omega0 > 0.0)) throw ConfigError("oscillator: omega0 must be > 0");
  if (!(q0 > 0.0)) throw ConfigError("oscillator: q0 must be > 0");
  if (!(omega_m > 0.0)) throw ConfigError("oscillator: omega_m must be > 0");
}

UnscaledDamping unscaled_damping(const OscillatorParams& params) {
  const double scale = params.linear_damping();
  return {scale * params.gamma3, scale * params.gamma5};
}

OscillatorParams with_unscaled_damping(OscillatorParams params, double gamma3, double gamma5) {
  params.validate();
  const double scale = params.linear_damping();
  params.gamma3 = gamma3 / scale;
  params.gamma5 = gamma5 / scale;
  return params;
}

void SweepControl::validate() const {
  if (!std::isfinite(p) || p < 0.0) throw ConfigError("sweep control: p must be finite and >= 0");
}

DampingMode parse_damping_mode(const std::string& text) {
  if (text == "vdp") return DampingMode::vdp;
  if (text == "quintic") return DampingMode::quintic;
  if (text == "general") return DampingMode::general;
  throw ConfigError("unknown damping mode '" + text + "' (expected vdp, quintic or general)");
}

const char* to_string(DampingMode mode) {
  switch (mode) {
    case DampingMode::vdp: return "vdp";
    case DampingMode::quintic: return "quintic";
    case DampingMode::general: return "general";
  }
  return "?";
}

void PhysicalModelParams::validate() const {
  require_finite({mass, omega0, q0, tau, f_rad, photothermal_amplitude, working_point, fringe_phase},
                 "physical model: parameters must be finite");
  if (!(mass > 0.0)) throw ConfigError("physical model: mass must be > 0");
  if (!(tau > 0.0)) throw ConfigError("physical model: tau must be > 0");
  if (!(omega0 > 0.0) || !(q0 > 0.0)) throw ConfigError("physical model: omega0 and q0 must be > 0");
  fringe.validate();
}

PolynomialRhs::PolynomialRhs(const OscillatorParams& params, DampingMode mode)
    : params_(params), mode_(mode) {
  params_.validate();
  damping_ = params_.linear_damping();
  g3_ = params_.gamma3;
  g5_ = mode == DampingMode::vdp ? 0.0 : params_.gamma5;
  a3_ = mode == DampingMode::general ? params_.alpha3 : 0.0;
  a5_ = mode == DampingMode::general ? params_.alpha5 : 0.0;
  wm2_ = params_.omega_m * params_.omega_m;
}

Derivative PolynomialRhs::operator()(const State& s, double p) const {
  if (!std::isfinite(s.x) || !std::isfinite(s.v) || !std::isfinite(s.t)) non_finite_state(s);
  const kernels::detail::LaneCoefficients c{damping_, 1.0 - p, g3_, g5_, a3_, a5_, wm2_};
  const double drive = kernels::detail::drive_term(params_.f_m, params_.omega0, params_.phi0, s.t);
  return {s.v, kernels::detail::acceleration(c, s.x, s.v, drive), 0.0};
}

double PolynomialRhs::fastest_frequency() const {
  return std::max(params_.omega0, params_.omega_m);
}

Rhs build_polynomial_rhs(const OscillatorParams& params, SweepControl control, DampingMode mode) {
  control.validate();
  PolynomialRhs rhs(params, mode);
  return [rhs, p = control.p](const State& s) { return rhs(s, p); };
}

double normalized_fringe(const InterferometerParams& fringe, double distance, double phase) {
  const double theta = 4.0 * kPi * distance / fringe.wavelength + phase;
  return (1.0 + fringe.visibility * std::cos(theta)) / (1.0 + fringe.visibility);
}

double normalized_fringe_slope(const InterferometerParams& fringe, double distance, double phase) {
  const double k = 4.0 * kPi / fringe.wavelength;
  return -fringe.visibility * k * std::sin(k * distance + phase) / (1.0 + fringe.visibility);
}

PhysicalRhs::PhysicalRhs(const PhysicalModelParams& params) : params_(params) {
  params_.validate();
}

double PhysicalRhs::steady_force(double x) const {
  return params_.photothermal_amplitude *
         normalized_fringe(params_.fringe, params_.working_point + x, params_.fringe_phase);
}

double PhysicalRhs::steady_force_slope(double x) const {
  return params_.photothermal_amplitude *
         normalized_fringe_slope(params_.fringe, params_.working_point + x, params_.fringe_phase);
}

Derivative PhysicalRhs::operator()(const State& s) const {
  if (!std::isfinite(s.x) || !std::isfinite(s.v) || !std::isfinite(s.f_ph) || !std::isfinite(s.t)) {
    non_finite_state(s);
  }
  const double damping = params_.omega0 / params_.q0;
  const double w2 = params_.omega0 * params_.omega0;
  // Same grouping as the polynomial model with p = 0 and no nonlinearity.
  double a = (-(damping * 1.0)) * s.v;
  a = a - w2 * s.x;
  a = a + (params_.f_rad + s.f_ph) / params_.mass;
  return {s.v, a, (steady_force(s.x) - s.f_ph) / params_.tau};
}

double PhysicalRhs::static_equilibrium() const {
  // Fixed point of x = (f_rad + F_ss(x)) / k; Newton with the analytic slope.
  const double k = params_.spring_constant();
  double x = (params_.f_rad + steady_force(0.0)) / k;
  for (int i = 0; i < 100; ++i) {
    const double g = k * x - params_.f_rad - steady_force(x);
    const double dg = k - steady_force_slope(x);
    if (dg == 0.0) break;
    const double step = g / dg;
    x -= step;
    if (std::fabs(step) <= 1e-15 * std::max(1.0, std::fabs(x))) break;
  }
  return x;
}

double PhysicalRhs::optical_spring_constant() const {
  return -steady_force_slope(static_equilibrium());
}

double PhysicalRhs::fastest_frequency() const { return params_.omega0; }

Rhs build_physical_rhs(const PhysicalModelParams& params) {
  PhysicalRhs rhs(params);
  return [rhs](const State& s) { return rhs(s); };
}

PhotothermalParams photothermal_equivalent(const PhysicalModelParams& params, double force_per_watt) {
  params.validate();
  PhotothermalParams out;
  out.q0 = params.q0;
  out.c_z = params.spring_constant();
  out.kappa = -force_per_watt *
              normalized_fringe_slope(params.fringe, params.working_point, params.fringe_phase);
  out.tau = params.tau;
  out.omega0 = params.omega0;
  out.omega_m = params.omega0;
  return out;
}

}  // namespace optomech
