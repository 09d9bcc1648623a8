#include <cassert>
#include <cmath>

#include "optomech/kernels.hpp"
#include "optomech/detail/rk4_common.hpp"

namespace optomech::kernels {

void OscillatorBatch::resize(std::size_t lanes) {
  for (auto* field : {&x, &v, &damping, &one_minus_p, &g3, &g5, &a3, &a5, &wm2, &fm,
                      &omega0, &phi0, &max_abs_x}) {
    field->assign(lanes, 0.0);
  }
  diverged.assign(lanes, 0);
}

namespace scalar {

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out) {
  assert(out.size() == input.size() && taps.size() % 2 == 1);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(input.size());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps.size() - 1) / 2;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) {
      const std::ptrdiff_t j = i + static_cast<std::ptrdiff_t>(k) - half;
      const double sample = (j >= 0 && j < n) ? input[static_cast<std::size_t>(j)] : 0.0;
      acc = acc + taps[k] * sample;
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
}

void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out) {
  assert(freqs.size() == out.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) out[i] = eval_resonance(r, freqs[i]);
}

void rk4_polynomial(OscillatorBatch& b, std::size_t steps, double dt, double divergence_limit) {
  const std::size_t lanes = b.size();
  std::vector<double> drive(3 * lanes);
  const double h2 = 0.5 * dt;
  const double h6 = dt / 6.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = b.t + static_cast<double>(b.steps_taken) * dt;
    detail::fill_drive(b, t, dt, drive);
    for (std::size_t i = 0; i < lanes; ++i) {
      if (b.diverged[i]) continue;
      const detail::LaneCoefficients c{b.damping[i], b.one_minus_p[i], b.g3[i], b.g5[i],
                                       b.a3[i],      b.a5[i],          b.wm2[i]};
      const double x = b.x[i];
      const double v = b.v[i];
      const double k1x = v;
      const double k1v = detail::acceleration(c, x, v, drive[i]);
      const double x2 = x + h2 * k1x;
      const double v2 = v + h2 * k1v;
      const double k2x = v2;
      const double k2v = detail::acceleration(c, x2, v2, drive[lanes + i]);
      const double x3 = x + h2 * k2x;
      const double v3 = v + h2 * k2v;
      const double k3x = v3;
      const double k3v = detail::acceleration(c, x3, v3, drive[lanes + i]);
      const double x4 = x + dt * k3x;
      const double v4 = v + dt * k3v;
      const double k4x = v4;
      const double k4v = detail::acceleration(c, x4, v4, drive[2 * lanes + i]);
      const double xn = x + h6 * (((k1x + 2.0 * k2x) + 2.0 * k3x) + k4x);
      const double vn = v + h6 * (((k1v + 2.0 * k2v) + 2.0 * k3v) + k4v);
      if (!(std::fabs(xn) <= divergence_limit) || !(std::fabs(vn) <= divergence_limit)) {
        b.diverged[i] = 1;
        continue;
      }
      b.x[i] = xn;
      b.v[i] = vn;
      const double ax = std::fabs(xn);
      if (ax > b.max_abs_x[i]) b.max_abs_x[i] = ax;
    }
    ++b.steps_taken;
  }
}

}  // namespace scalar
}  // namespace optomech::kernels
