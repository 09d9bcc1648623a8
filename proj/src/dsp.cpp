#include "optomech/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

#include "optomech/detail/sliding_max.hpp"
#include "optomech/errors.hpp"
#include "optomech/kernels.hpp"

namespace optomech {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

}  // namespace

const char* to_string(AmplitudeUnit unit) {
  switch (unit) {
    case AmplitudeUnit::volt_rms: return "Veff";
    case AmplitudeUnit::volt_peak: return "Vpk";
    case AmplitudeUnit::nanometer: return "nm";
    case AmplitudeUnit::meter: return "m";
    case AmplitudeUnit::arbitrary: return "arb";
  }
  return "?";
}

AmplitudeUnit parse_amplitude_unit(const std::string& text) {
  for (AmplitudeUnit u : {AmplitudeUnit::volt_rms, AmplitudeUnit::volt_peak, AmplitudeUnit::nanometer,
                          AmplitudeUnit::meter, AmplitudeUnit::arbitrary}) {
    if (text == to_string(u)) return u;
  }
  throw InputError("unknown amplitude unit '" + text + "'");
}

WindowKind parse_window(const std::string& text) {
  if (text == "rectangular" || text == "rect") return WindowKind::rectangular;
  if (text == "hann") return WindowKind::hann;
  throw ConfigError("unknown window '" + text + "' (expected rectangular or hann)");
}

std::vector<double> Spectrum::frequencies() const {
  std::vector<double> f(amplitudes.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = frequency(i);
  return f;
}

void Spectrum::validate() const {
  if (!(df > 0.0) || !std::isfinite(df)) throw InputError("spectrum: df must be > 0");
  if (!std::isfinite(f0_bin) || f0_bin < 0.0) throw InputError("spectrum: first bin must be finite and >= 0");
  for (double a : amplitudes) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw InputError("spectrum: amplitudes must be finite and >= 0");
  }
}

void CalibrationConstants::validate() const {
  if (!(sensitivity_nm_per_vpp > 0.0) || !(amplification > 0.0)) {
    throw ConfigError("calibration: sensitivity and amplification must be > 0");
  }
}

std::vector<double> design_lowpass(double sample_rate, double cutoff, double transition) {
  if (!(sample_rate > 0.0) || !(cutoff > 0.0) || !(cutoff < sample_rate / 2.0) || !(transition > 0.0)) {
    throw ConfigError("lowpass: need 0 < cutoff < sample_rate/2 and transition > 0");
  }
  // Blackman: ~74 dB stopband, transition ~ 5.5 fs / N.
  std::size_t n = static_cast<std::size_t>(std::ceil(5.5 * sample_rate / transition));
  n = std::max<std::size_t>(n, 3) | 1;
  const double fc = cutoff / sample_rate;
  const double mid = static_cast<double>(n - 1) / 2.0;
  std::vector<double> taps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i) - mid;
    const double sinc = k == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * k) / (kPi * k);
    const double w = 0.42 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)) +
                     0.08 * std::cos(4.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1));
    taps[i] = sinc * w;
  }
  const double gain = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= gain;
  return taps;
}

TimeTrace mix_and_lowpass(const TimeTrace& trace, double ref_freq, double cutoff, const MixOptions& options) {
  trace.validate();
  const double fs = 1.0 / trace.dt;
  const double nyquist = fs / 2.0;
  if (!(ref_freq >= 0.0) || !(ref_freq < nyquist)) {
    throw ConfigError("mix: reference frequency must lie in [0, fs/2)");
  }
  if (!(cutoff > 0.0) || !(cutoff < nyquist)) {
    throw ConfigError("mix: cutoff must lie in (0, fs/2)");
  }
  double lower_edge = 0.0;
  double upper_edge = nyquist;
  if (options.signal_freq) {
    const double f = *options.signal_freq;
    if (!(f > 0.0) || !(f + ref_freq < fs)) {
      throw ConfigError("mix: signal plus reference must stay below the sample rate");
    }
    const double diff = std::fabs(f - ref_freq);
    double sum = f + ref_freq;
    if (sum > nyquist) sum = fs - sum;  // aliased image
    if (ref_freq == 0.0) sum = nyquist;
    if (!(cutoff > diff && cutoff < sum)) {
      std::ostringstream os;
      os << "mix: cutoff " << cutoff << " Hz must lie between the difference (" << diff << " Hz) and sum ("
         << sum << " Hz) frequencies";
      throw ConfigError(os.str());
    }
    lower_edge = diff;
    upper_edge = sum;
  }
  const double transition =
      options.transition.value_or(0.5 * std::min(cutoff - lower_edge, upper_edge - cutoff));
  const std::vector<double> taps = design_lowpass(fs, cutoff, transition);

  const std::size_t n = trace.samples.size();
  std::vector<double> reference(n);
  for (std::size_t i = 0; i < n; ++i) {
    reference[i] = std::cos(2.0 * kPi * ref_freq * trace.time_at(i));
  }
  std::vector<double> mixed(n);
  kernels::multiply(trace.samples, reference, mixed);
  TimeTrace out;
  out.t0 = trace.t0;
  out.dt = trace.dt;
  out.samples.resize(n);
  kernels::fir_same(mixed, taps, out.samples);
  out.source = trace.source.empty() ? "mixed" : trace.source + " (mixed)";
  return out;
}

Spectrum amplitude_spectrum(const TimeTrace& trace, WindowKind window, AmplitudeUnit unit) {
  trace.validate();
  const std::size_t n = trace.samples.size();
  if (n < 2) throw InputError("spectrum: need at least two samples");

  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  FftwBuffer<fftw_complex> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  if (!in || !out) throw std::bad_alloc();

  double coherent_gain = 1.0;
  if (window == WindowKind::hann) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
      in[i] = trace.samples[i] * w;
      sum += w;
    }
    coherent_gain = sum / static_cast<double>(n);
  } else {
    std::copy(trace.samples.begin(), trace.samples.end(), in.get());
  }

  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  Spectrum s;
  s.f0_bin = 0.0;
  s.df = 1.0 / (static_cast<double>(n) * trace.dt);
  s.unit = unit;
  const std::size_t bins = n / 2 + 1;
  s.amplitudes.resize(bins);
  const double scale = 1.0 / (static_cast<double>(n) * coherent_gain);
  for (std::size_t k = 0; k < bins; ++k) {
    const double mag = std::hypot(out[k][0], out[k][1]) * scale;
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    s.amplitudes[k] = unpaired ? mag : 2.0 * mag;
  }
  return s;
}

double dbv_to_veff(double level_dbv) { return std::pow(10.0, level_dbv / 20.0); }

double veff_to_dbv(double volts) {
  if (!(volts > 0.0)) throw DomainError("veff_to_dbv: voltage must be > 0");
  return 20.0 * std::log10(volts);
}

Spectrum calibrate_to_displacement(const Spectrum& spectrum, const CalibrationConstants& cal, int fringe_slope_sign) {
  cal.validate();
  spectrum.validate();
  if (fringe_slope_sign != 1 && fringe_slope_sign != -1) {
    throw InputError("calibration: fringe slope sign must be +1 or -1");
  }
  double to_vpp = 0.0;
  switch (spectrum.unit) {
    case AmplitudeUnit::volt_rms: to_vpp = 2.0 * std::sqrt(2.0); break;
    case AmplitudeUnit::volt_peak: to_vpp = 2.0; break;
    default:
      throw UnitError(std::string("calibration: expected a spectrum in volts, got ") + to_string(spectrum.unit));
  }
  Spectrum out = spectrum;
  const double factor = to_vpp * cal.sensitivity_nm_per_vpp / cal.amplification;
  for (double& a : out.amplitudes) a *= factor;
  out.unit = AmplitudeUnit::nanometer;
  out.slope_sign = fringe_slope_sign;
  return out;
}

TimeTrace envelope(const TimeTrace& trace, double window) {
  trace.validate();
  if (!(window >= trace.dt)) throw InputError("envelope: window shorter than the sample interval");
  const auto width = static_cast<std::size_t>(std::llround(window / trace.dt));
  TimeTrace out;
  out.t0 = trace.t0;
  out.dt = trace.dt;
  out.samples = detail::sliding_max_abs(trace.samples, width, true);
  out.source = trace.source.empty() ? "envelope" : trace.source + " (envelope)";
  return out;
}

}  // namespace optomech
