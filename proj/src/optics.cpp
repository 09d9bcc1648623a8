#include "optomech/optics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "optomech/errors.hpp"

namespace optomech {
namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace

void InterferometerParams::validate() const {
  require(std::isfinite(wavelength) && wavelength > 0.0, "interferometer: wavelength must be > 0");
  require(visibility >= 0.0 && visibility <= 1.0, "interferometer: visibility must lie in [0, 1]");
  require(std::isfinite(mean_intensity), "interferometer: mean_intensity must be finite");
  require(r1 >= 0.0 && r1 <= 1.0 && r2 >= 0.0 && r2 <= 1.0,
          "interferometer: reflectivities must lie in [0, 1]");
}

void PhotothermalParams::validate() const {
  for (double v : {q0, c_z, kappa, tau, omega0, omega_m}) {
    require(std::isfinite(v), "photothermal: parameters must be finite");
  }
  require(q0 > 0 && c_z > 0 && tau > 0 && omega0 > 0 && omega_m > 0,
          "photothermal: q0, c_z, tau, omega0, omega_m must be > 0");
}

void NoiseParams::validate() const {
  for (double v : {amplitude, bandwidth, temperature, f0, q, c_l, boltzmann}) {
    require(std::isfinite(v) && v > 0.0, "noise: all parameters must be finite and > 0");
  }
}

FringeSample fringe_intensity(const InterferometerParams& params, double distance) {
  const double k = 4.0 * kPi / params.wavelength;
  const double phase = k * distance;
  return {params.mean_intensity * (1.0 + params.visibility * std::cos(phase)),
          -params.mean_intensity * params.visibility * k * std::sin(phase)};
}

double finesse(double r1, double r2) {
  const double r = r1 * r2;
  if (!(r > 0.0 && r < 1.0)) {
    throw DomainError("finesse: product of reflectivities must lie in (0, 1), got " + std::to_string(r));
  }
  return kPi * std::pow(r, 0.25) / (1.0 - std::sqrt(r));
}

EffectiveQ effective_q(const PhotothermalParams& params, double power) {
  params.validate();
  if (!(power >= 0.0)) throw ConfigError("effective_q: power must be >= 0");
  const double lag = params.omega0 * params.tau / (1.0 + params.tau * params.tau * params.omega_m * params.omega_m);
  const double inverse = 1.0 / params.q0 - (params.kappa * power / params.c_z) * lag;
  DampingRegime regime = DampingRegime::damped;
  if (inverse == 0.0) {
    regime = DampingRegime::critical;
  } else if (inverse < 0.0) {
    regime = DampingRegime::self_oscillating;
  }
  const double q = inverse == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / inverse;
  return {q, inverse, regime};
}

double critical_power(const PhotothermalParams& params) {
  params.validate();
  if (params.kappa <= 0.0) return std::numeric_limits<double>::infinity();
  return params.c_z * (1.0 + params.tau * params.tau * params.omega_m * params.omega_m) /
         (params.q0 * params.kappa * params.omega0 * params.tau);
}

double thermal_frequency_noise(const NoiseParams& p) {
  p.validate();
  return std::sqrt(p.boltzmann * p.temperature * p.bandwidth * p.f0 / (kPi * p.q * p.c_l)) / p.amplitude;
}

LissajousCurve lissajous_curve(double phase_offset, double depth, const LissajousParams& params) {
  params.interferometer.validate();
  if (params.samples < 3) throw ConfigError("lissajous: need at least 3 samples");
  if (!std::isfinite(phase_offset) || !std::isfinite(depth)) {
    throw ConfigError("lissajous: phase and depth must be finite");
  }
  if (std::fabs(depth) > std::fabs(params.mean_inverse_q) && params.mean_inverse_q != 0.0) {
    // Q would change sign along the fringe; still drawable, but not a damping
    // modulation any more.
    throw ConfigError("lissajous: modulation depth exceeds the mean inverse Q");
  }

  LissajousCurve curve;
  curve.points.reserve(params.samples + 1);
  const double period = params.interferometer.wavelength / 2.0;
  for (std::size_t i = 0; i <= params.samples; ++i) {
    // The closing sample reuses x0 = 0 so the curve closes exactly.
    const std::size_t j = i == params.samples ? 0 : i;
    const double x0 = period * static_cast<double>(j) / static_cast<double>(params.samples);
    const double theta = 4.0 * kPi * x0 / params.interferometer.wavelength;
    const double slope = fringe_intensity(params.interferometer, x0).slope;
    // Normalized slope shape is -sin(theta); shift it by the phase offset.
    const double inverse_q = params.mean_inverse_q - depth * std::sin(theta + phase_offset);
    curve.points.push_back({slope, inverse_q});
  }

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& a = curve.points[i];
    const auto& b = curve.points[i + 1];
    area += a.slope * b.inverse_q - b.slope * a.inverse_q;
  }
  curve.enclosed_area = std::fabs(area) / 2.0;

  const double wrapped = std::remainder(phase_offset, kPi);
  curve.shape = std::fabs(wrapped) < 1e-12 ? LissajousShape::line : LissajousShape::oval;
  return curve;
}

}  // namespace optomech
