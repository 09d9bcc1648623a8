#include "optomech/kernels.hpp"

#ifdef OPTOMECH_HAVE_AVX2_KERNELS

#include <immintrin.h>

#include <cassert>
#include <cmath>

#include "optomech/detail/rk4_common.hpp"

#define OPTOMECH_AVX2 __attribute__((target("avx2")))

namespace optomech::kernels::avx2 {
namespace {

struct LaneVec {
  __m256d damping, one_minus_p, g3, g5, a3, a5, wm2;
};

OPTOMECH_AVX2 inline __m256d acceleration(const LaneVec& c, __m256d x, __m256d v, __m256d drive) {
  const __m256d x2 = _mm256_mul_pd(x, x);
  const __m256d x4 = _mm256_mul_pd(x2, x2);
  const __m256d bracket =
      _mm256_add_pd(_mm256_add_pd(c.one_minus_p, _mm256_mul_pd(c.g3, x2)), _mm256_mul_pd(c.g5, x4));
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d a = _mm256_mul_pd(_mm256_xor_pd(_mm256_mul_pd(c.damping, bracket), sign), v);
  a = _mm256_sub_pd(a, _mm256_mul_pd(c.wm2, x));
  a = _mm256_sub_pd(a, _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(c.a3, x2), _mm256_mul_pd(c.a5, x4)), x));
  return _mm256_add_pd(a, drive);
}

OPTOMECH_AVX2 inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

}  // namespace

OPTOMECH_AVX2 void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() == a.size());
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

// Vectorised across output samples: each lane accumulates the taps in the
// same order as the scalar reference.
OPTOMECH_AVX2 void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out) {
  assert(out.size() == input.size() && taps.size() % 2 == 1);
  const std::size_t n = input.size();
  const std::size_t m = taps.size();
  const std::size_t half = (m - 1) / 2;
  std::vector<double> padded(n + m - 1 + 4, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i + half] = input[i];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < m; ++k) {
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(padded.data() + i + k)));
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) acc = acc + taps[k] * padded[i + k];
    out[i] = acc;
  }
}

OPTOMECH_AVX2 void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out) {
  assert(freqs.size() == out.size());
  const double inv_f0sq_s = 1.0 / (r.f0 * r.f0);
  const double inv_f0q_s = 1.0 / (r.f0 * r.q_eff);
  const double amq_s = r.a_max / r.q_eff;
  const __m256d f0 = _mm256_set1_pd(r.f0);
  const __m256d inv_f0sq = _mm256_set1_pd(inv_f0sq_s);
  const __m256d inv_f0q = _mm256_set1_pd(inv_f0q_s);
  const __m256d amq = _mm256_set1_pd(amq_s);
  const __m256d floor = _mm256_set1_pd(r.a_floor);
  const std::size_t n = freqs.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d f = _mm256_loadu_pd(freqs.data() + i);
    const __m256d detune = _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(f0, f), _mm256_add_pd(f0, f)), inv_f0sq);
    const __m256d width = _mm256_mul_pd(f, inv_f0q);
    const __m256d denom = _mm256_add_pd(_mm256_mul_pd(detune, detune), _mm256_mul_pd(width, width));
    _mm256_storeu_pd(out.data() + i, _mm256_add_pd(floor, _mm256_div_pd(amq, _mm256_sqrt_pd(denom))));
  }
  for (; i < n; ++i) out[i] = eval_resonance(r, freqs[i]);
}

OPTOMECH_AVX2 void rk4_polynomial(OscillatorBatch& b, std::size_t steps, double dt, double divergence_limit) {
  const std::size_t lanes = b.size();
  const std::size_t full = lanes - lanes % 4;
  std::vector<double> drive(3 * lanes);
  const double h2s = 0.5 * dt;
  const double h6s = dt / 6.0;
  const __m256d h2 = _mm256_set1_pd(h2s);
  const __m256d h6 = _mm256_set1_pd(h6s);
  const __m256d hdt = _mm256_set1_pd(dt);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d limit = _mm256_set1_pd(divergence_limit);

  for (std::size_t s = 0; s < steps; ++s) {
    const double t = b.t + static_cast<double>(b.steps_taken) * dt;
    detail::fill_drive(b, t, dt, drive);
    for (std::size_t i = 0; i < full; i += 4) {
      const LaneVec c{_mm256_loadu_pd(&b.damping[i]), _mm256_loadu_pd(&b.one_minus_p[i]),
                      _mm256_loadu_pd(&b.g3[i]),      _mm256_loadu_pd(&b.g5[i]),
                      _mm256_loadu_pd(&b.a3[i]),      _mm256_loadu_pd(&b.a5[i]),
                      _mm256_loadu_pd(&b.wm2[i])};
      const __m256d x = _mm256_loadu_pd(&b.x[i]);
      const __m256d v = _mm256_loadu_pd(&b.v[i]);
      const __m256d k1x = v;
      const __m256d k1v = acceleration(c, x, v, _mm256_loadu_pd(&drive[i]));
      const __m256d x2 = _mm256_add_pd(x, _mm256_mul_pd(h2, k1x));
      const __m256d v2 = _mm256_add_pd(v, _mm256_mul_pd(h2, k1v));
      const __m256d k2x = v2;
      const __m256d k2v = acceleration(c, x2, v2, _mm256_loadu_pd(&drive[lanes + i]));
      const __m256d x3 = _mm256_add_pd(x, _mm256_mul_pd(h2, k2x));
      const __m256d v3 = _mm256_add_pd(v, _mm256_mul_pd(h2, k2v));
      const __m256d k3x = v3;
      const __m256d k3v = acceleration(c, x3, v3, _mm256_loadu_pd(&drive[lanes + i]));
      const __m256d x4 = _mm256_add_pd(x, _mm256_mul_pd(hdt, k3x));
      const __m256d v4 = _mm256_add_pd(v, _mm256_mul_pd(hdt, k3v));
      const __m256d k4x = v4;
      const __m256d k4v = acceleration(c, x4, v4, _mm256_loadu_pd(&drive[2 * lanes + i]));
      const __m256d sx = _mm256_add_pd(
          _mm256_add_pd(_mm256_add_pd(k1x, _mm256_mul_pd(two, k2x)), _mm256_mul_pd(two, k3x)), k4x);
      const __m256d sv = _mm256_add_pd(
          _mm256_add_pd(_mm256_add_pd(k1v, _mm256_mul_pd(two, k2v)), _mm256_mul_pd(two, k3v)), k4v);
      const __m256d xn = _mm256_add_pd(x, _mm256_mul_pd(h6, sx));
      const __m256d vn = _mm256_add_pd(v, _mm256_mul_pd(h6, sv));

      const __m256d axn = abs_pd(xn);
      const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(axn, limit, _CMP_LE_OQ),
                                       _mm256_cmp_pd(abs_pd(vn), limit, _CMP_LE_OQ));
      const __m256i prev = _mm256_set_epi64x(b.diverged[i + 3], b.diverged[i + 2], b.diverged[i + 1], b.diverged[i]);
      const __m256d alive = _mm256_castsi256_pd(_mm256_cmpeq_epi64(prev, _mm256_setzero_si256()));
      const __m256d update = _mm256_and_pd(ok, alive);
      _mm256_storeu_pd(&b.x[i], _mm256_blendv_pd(x, xn, update));
      _mm256_storeu_pd(&b.v[i], _mm256_blendv_pd(v, vn, update));
      const __m256d mx = _mm256_loadu_pd(&b.max_abs_x[i]);
      const __m256d grow = _mm256_and_pd(update, _mm256_cmp_pd(axn, mx, _CMP_GT_OQ));
      _mm256_storeu_pd(&b.max_abs_x[i], _mm256_blendv_pd(mx, axn, grow));
      const int failed = _mm256_movemask_pd(_mm256_andnot_pd(ok, alive));
      for (int l = 0; l < 4; ++l) {
        if (failed & (1 << l)) b.diverged[i + static_cast<std::size_t>(l)] = 1;
      }
    }
    for (std::size_t i = full; i < lanes; ++i) {
      if (b.diverged[i]) continue;
      const detail::LaneCoefficients c{b.damping[i], b.one_minus_p[i], b.g3[i], b.g5[i],
                                       b.a3[i],      b.a5[i],          b.wm2[i]};
      const double x = b.x[i];
      const double v = b.v[i];
      const double k1x = v;
      const double k1v = detail::acceleration(c, x, v, drive[i]);
      const double x2 = x + h2s * k1x;
      const double v2 = v + h2s * k1v;
      const double k2x = v2;
      const double k2v = detail::acceleration(c, x2, v2, drive[lanes + i]);
      const double x3 = x + h2s * k2x;
      const double v3 = v + h2s * k2v;
      const double k3x = v3;
      const double k3v = detail::acceleration(c, x3, v3, drive[lanes + i]);
      const double x4 = x + dt * k3x;
      const double v4 = v + dt * k3v;
      const double k4x = v4;
      const double k4v = detail::acceleration(c, x4, v4, drive[2 * lanes + i]);
      const double xn = x + h6s * (((k1x + 2.0 * k2x) + 2.0 * k3x) + k4x);
      const double vn = v + h6s * (((k1v + 2.0 * k2v) + 2.0 * k3v) + k4v);
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

}  // namespace optomech::kernels::avx2

#endif  // OPTOMECH_HAVE_AVX2_KERNELS
