#include <atomic>

#include "optomech/errors.hpp"
#include "optomech/kernels.hpp"

namespace optomech::kernels {
namespace {

Isa probe() {
#ifdef OPTOMECH_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

bool isa_supported(Isa isa) {
  return isa == Isa::scalar || detected_isa() == Isa::avx2;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("instruction set '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  }
  active().store(isa, std::memory_order_relaxed);
}

#ifdef OPTOMECH_HAVE_AVX2_KERNELS
#define OPTOMECH_DISPATCH(fn, ...)                                   \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define OPTOMECH_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  OPTOMECH_DISPATCH(multiply, a, b, out);
}

void fir_same(std::span<const double> input, std::span<const double> taps, std::span<double> out) {
  OPTOMECH_DISPATCH(fir_same, input, taps, out);
}

void resonance_curve(const ResonanceParams& r, std::span<const double> freqs, std::span<double> out) {
  OPTOMECH_DISPATCH(resonance_curve, r, freqs, out);
}

void rk4_polynomial(OscillatorBatch& batch, std::size_t steps, double dt, double divergence_limit) {
  OPTOMECH_DISPATCH(rk4_polynomial, batch, steps, dt, divergence_limit);
}

}  // namespace optomech::kernels
