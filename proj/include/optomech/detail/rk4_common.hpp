#pragma once

#include <cmath>
#include <span>

#include "optomech/kernels.hpp"

namespace optomech::kernels::detail {

struct LaneCoefficients {
  double damping, one_minus_p, g3, g5, a3, a5, wm2;
};

// Shared with model::PolynomialRhs; the operation order here defines the
// bit pattern every integrator in the project reproduces.
inline double acceleration(const LaneCoefficients& c, double x, double v, double drive) {
  const double x2 = x * x;
  const double x4 = x2 * x2;
  const double bracket = (c.one_minus_p + c.g3 * x2) + c.g5 * x4;
  double a = (-(c.damping * bracket)) * v;
  a = a - c.wm2 * x;
  a = a - (c.a3 * x2 + c.a5 * x4) * x;
  return a + drive;
}

inline double drive_term(double fm, double omega0, double phi0, double t) {
  return (2.0 * fm) * std::cos(omega0 * t + phi0);
}

// Drive at t, t + dt/2 and t + dt for every lane, laid out [stage][lane].
inline void fill_drive(const OscillatorBatch& b, double t, double dt, std::span<double> out) {
  const std::size_t lanes = b.size();
  const double th = t + 0.5 * dt;
  const double t1 = t + dt;
  for (std::size_t i = 0; i < lanes; ++i) {
    out[i] = drive_term(b.fm[i], b.omega0[i], b.phi0[i], t);
    out[lanes + i] = drive_term(b.fm[i], b.omega0[i], b.phi0[i], th);
    out[2 * lanes + i] = drive_term(b.fm[i], b.omega0[i], b.phi0[i], t1);
  }
}

}  // namespace optomech::kernels::detail
