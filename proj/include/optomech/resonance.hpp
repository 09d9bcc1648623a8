#pragma once

#include <array>
#include <cmath>

namespace optomech {

/// Parameters of the driven harmonic-oscillator amplitude response.
struct ResonanceParams {
  double a_max = 0.0;   // peak amplitude above the floor
  double f0 = 1.0;      // resonance frequency (Hz)
  double q_eff = 1.0;   // effective quality factor
  double a_floor = 0.0; // additive noise floor
};

// Order of the parameters in Jacobians and covariance blocks.
enum ResonanceIndex : int { kAmax = 0, kF0 = 1, kQ = 2, kFloor = 3 };

/// Amplitude response A(f) = floor + (a_max/q) / sqrt((1 - f²/f0²)² + (f/(f0 q))²).
///
/// The detuning term is evaluated as (f0 - f)(f0 + f)/f0² so that very narrow
/// peaks (q ~ 1e7) keep full relative precision near f0. The SIMD kernels
/// evaluate exactly this expression sequence.
inline double eval_resonance(const ResonanceParams& r, double f) {
  const double inv_f0sq = 1.0 / (r.f0 * r.f0);
  const double inv_f0q = 1.0 / (r.f0 * r.q_eff);
  const double amq = r.a_max / r.q_eff;
  const double detune = ((r.f0 - f) * (r.f0 + f)) * inv_f0sq;
  const double width = f * inv_f0q;
  const double denom = detune * detune + width * width;
  return r.a_floor + amq / std::sqrt(denom);
}

inline double eval_resonance(double a_max, double f0, double q_eff, double a_floor, double f) {
  return eval_resonance(ResonanceParams{a_max, f0, q_eff, a_floor}, f);
}

/// Analytic partial derivatives of eval_resonance w.r.t. (a_max, f0, q_eff, a_floor).
std::array<double, 4> resonance_jacobian(const ResonanceParams& r, double f);

}  // namespace optomech
