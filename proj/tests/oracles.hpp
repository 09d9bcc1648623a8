#pragma once

// Closed-form reference values written independently of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "optomech/dsp.hpp"
#include "optomech/random.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

/// Textbook driven-oscillator amplitude, evaluated in the naive order.
inline double resonance(double a_max, double f0, double q, double floor, double f) {
  const double u = f / f0;
  return floor + (a_max / q) / std::sqrt((1.0 - u * u) * (1.0 - u * u) + (u / q) * (u / q));
}

/// Positive roots of (1-p) + g3 A²/4 + g5 A⁴/8 = 0, ascending.
inline std::vector<double> slow_flow_roots(double g3, double g5, double p) {
  std::vector<double> out;
  if (g5 == 0.0) {
    const double a2 = -4.0 * (1.0 - p) / g3;
    if (g3 != 0.0 && a2 > 0.0) out.push_back(std::sqrt(a2));
    return out;
  }
  const double a = g5 / 8.0, b = g3 / 4.0, c = 1.0 - p;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return out;
  for (double s : {-1.0, 1.0}) {
    const double u = (-b + s * std::sqrt(disc)) / (2.0 * a);
    if (u > 0.0) out.push_back(std::sqrt(u));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double thermal_noise(double amplitude, double kb, double t, double b, double f0, double q, double c_l) {
  return std::sqrt(kb * t * b * f0 / (kPi * q * c_l)) / amplitude;
}

inline double inverse_q_eff(double q0, double kappa, double power, double c_z, double omega0, double tau,
                            double omega_m) {
  return 1.0 / q0 - (kappa * power / c_z) * omega0 * tau / (1.0 + tau * tau * omega_m * omega_m);
}

/// Spectrum of the resonance on n bins starting at f_start, optionally with
/// multiplicative Gaussian noise.
inline optomech::Spectrum synth(double a_max, double f0, double q, double floor, double f_start, double df,
                                std::size_t n, double noise = 0.0, std::uint64_t seed = 0) {
  optomech::Spectrum s;
  s.f0_bin = f_start;
  s.df = df;
  s.unit = optomech::AmplitudeUnit::nanometer;
  optomech::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    double a = resonance(a_max, f0, q, floor, s.frequency(i));
    if (noise > 0.0) a *= 1.0 + noise * rng.normal();
    s.amplitudes.push_back(std::max(a, 0.0));
  }
  return s;
}

struct Row {
  const char* name;
  double a_max, f0, q, floor;
};

// Fitted rows of the published resonance table (a: low-Q branch with floor;
// b1-b3: high-Q branch, floor fixed at zero).
inline constexpr Row kRowA{"a", 2.4e-2, 74083.34, 4.3e5, 1.4e-3};
inline constexpr Row kRowB1{"b1", 79.4, 74083.34, 1.1e6, 0.0};
inline constexpr Row kRowB2{"b2", 84.2, 74083.38, 1.4e6, 0.0};
inline constexpr Row kRowB3{"b3", 78.9, 74083.40, 2.6e7, 0.0};

inline optomech::Spectrum synth_row(const Row& r, double noise = 0.0, std::uint64_t seed = 0) {
  return synth(r.a_max, r.f0, r.q, r.floor, 74063.0, 0.1, 401, noise, seed);
}

/// Row spectrum with additive Gaussian noise of fixed sd sigma.
inline optomech::Spectrum synth_row_additive(const Row& r, double sigma, std::uint64_t seed) {
  optomech::Spectrum s = synth_row(r);
  optomech::Rng rng(seed);
  for (double& a : s.amplitudes) a += sigma * rng.normal();
  return s;
}

inline double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

}  // namespace oracle
