#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant chosen at runtime. Both variants perform the same IEEE
// operations in the same order, so their outputs are bit-identical.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "optomech/resonance.hpp"

namespace optomech::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by the running CPU.
Isa detected_isa();

/// Instruction set currently used by the dispatching entry points.
Isa active_isa();

/// Force a variant (tests, benchmarks). Throws ConfigError if unsupported.
void set_active_isa(Isa isa);

bool isa_supported(Isa isa);

/// Structure-of-arrays batch of independent polynomial oscillators.
///
/// Every lane integrates
///   x'' = -damping (1 - p + g3 x² + g5 x⁴) x' - wm2 x - (a3 x² + a5 x⁴) x
///         + 2 fm cos(omega0 t + phi0)
/// with its own coefficients. All lanes share the clock.
struct OscillatorBatch {
  explicit OscillatorBatch(std::size_t lanes = 0) { resize(lanes); }
  void resize(std::size_t lanes);
  std::size_t size() const { return x.size(); }

  std::vector<double> x, v;
  std::vector<double> damping;  // omega0 / q0
  std::vector<double> one_minus_p;
  std::vector<double> g3, g5, a3, a5;
  std::vector<double> wm2;      // omega_m²
  std::vector<double> fm, omega0, phi0;
  std::vector<double> max_abs_x;  // running max of |x|, updated every step
  std::vector<unsigned char> diverged;
  double t = 0.0;
  std::size_t steps_taken = 0;
};

// ---- reference kernels ---------------------------------------------------
namespace scalar {
void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out);
void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out);
void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out);
void rk4_polynomial(OscillatorBatch& batch, std::size_t steps, double dt, double divergence_limit);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define OPTOMECH_HAVE_AVX2_KERNELS 1
namespace avx2 {
void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out);
void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out);
void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out);
void rk4_polynomial(OscillatorBatch& batch, std::size_t steps, double dt, double divergence_limit);
}  // namespace avx2
#endif

// ---- dispatching entry points ----------------------------------------------

/// out[i] = a[i] * b[i]
void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out);

/// Centered ("same"-length) convolution with an odd-length, zero-padded FIR:
/// out[i] = sum_k taps[k] * input[i + k - (taps.size() - 1) / 2].
void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out);

/// out[i] = eval_resonance(r, freqs[i])
void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out);

/// Advance all lanes by `steps` classical RK4 steps of size dt. A lane whose
/// |x| or |v| exceeds divergence_limit (or turns non-finite) is frozen and
/// flagged in `diverged`.
void rk4_polynomial(OscillatorBatch& batch, std::size_t steps, double dt,
                    double divergence_limit = 1e6);

}  // namespace optomech::kernels
