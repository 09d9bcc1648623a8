// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "optomech/cli/commands.hpp"
#include "optomech/cli/config.hpp"
#include "optomech/dsp.hpp"
#include "optomech/experiments.hpp"
#include "optomech/fitting.hpp"
#include "optomech/integrate.hpp"
#include "optomech/optics.hpp"
#include "optomech/random.hpp"
#include "optomech/slowflow.hpp"

using namespace optomech;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a check; the first failing one is marked in the detail line.
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << " [failed: " << what << "]";
    pass = pass && ok;
  }
};

std::string num(double v) { return cli::format_double(std::round(v * 1e6) / 1e6); }

OscillatorParams sweep_params() {
  OscillatorParams p;
  p.omega0 = 1.0;
  p.omega_m = 1.0;
  p.q0 = 10.0;  // sigma0 = omega0 / q0 = 0.1
  p.gamma3 = -2.0;
  p.gamma5 = 1.0;
  p.f_m = 1e-4;
  return p;
}

SweepSchedule up_then_down(double p_final) {
  return SweepSchedule({{0.0, 0.0}, {5000.0, 1.2}, {6000.0, 1.2}, {10000.0, p_final}, {15000.0, p_final}});
}

// 1 ------------------------------------------------------------------------------
void sweep_above_fold(Outcome& o) {
  const auto t0 = Clock::now();
  const SweepRecord r = run_sweep(sweep_params(), up_then_down(0.51), 1, default_step(1.0));
  const auto onset = sweep_onset(r);
  const double top = mean_envelope(r, 5900.0, 6000.0);
  const double low = mean_envelope(r, 14500.0, 15000.0);
  const double elapsed = seconds_since(t0);
  o.detail << "onset p=" << (onset ? num(*onset) : "none") << " envelope(1.2)=" << num(top)
           << " envelope(0.51)=" << num(low) << " runtime=" << num(elapsed) << "s";
  o.require(onset && *onset >= 1.00 && *onset <= 1.15, "onset in [1.00, 1.15]");
  o.require(std::fabs(top / 2.09 - 1.0) <= 0.03, "2.09 +- 3%");
  o.require(std::fabs(low / 1.51 - 1.0) <= 0.03, "1.51 +- 3%");
  o.require(elapsed < 60.0, "runtime < 60 s");
}

// 2 ------------------------------------------------------------------------------
void sweep_below_fold(Outcome& o) {
  const SweepRecord r = run_sweep(sweep_params(), up_then_down(0.50), 1, default_step(1.0));
  // The envelope must drop below 0.01 while p is held at 0.50.
  double collapse_t = std::nan("");
  for (std::size_t i = 0; i < r.envelope.samples.size(); ++i) {
    const double t = r.envelope.time_at(i);
    if (t >= 10000.0 && r.envelope.samples[i] < 0.01) {
      collapse_t = t;
      break;
    }
  }
  const double final_env = r.envelope.samples.back();

  const std::vector<double> grid = {0.0, 0.1, 0.2,  0.3, 0.4, 0.45, 0.495, 0.51, 0.52,
                                    0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 1.05,  1.1,  1.2};
  const HysteresisCurve c = hysteresis_experiment(sweep_params(), grid, 1000.0, 1);
  const double area = loop_area(c);
  const auto& up = c.up_branch;
  const auto& down = c.down_branch;
  // Closed loop: both branches meet at the ends of the control range.
  const bool closed_top = std::fabs(up.back().amplitude / down.front().amplitude - 1.0) < 0.03;
  const bool closed_bottom = std::fabs(up.front().amplitude - down.back().amplitude) < 0.01;

  o.detail << "collapse t=" << num(collapse_t) << " final envelope=" << num(final_env)
           << " jump_up=" << (c.jump_up ? num(*c.jump_up) : "none")
           << " jump_down=" << (c.jump_down ? num(*c.jump_down) : "none") << " loop area=" << num(area);
  o.require(std::isfinite(collapse_t) && final_env < 0.01, "envelope < 0.01 during the 0.50 hold");
  o.require(c.jump_down && *c.jump_down > 0.50 && *c.jump_down <= 0.51, "jump_down in (0.50, 0.51]");
  o.require(c.jump_up && *c.jump_up > *c.jump_down, "jump_up above jump_down");
  o.require(area > 0.0 && closed_top && closed_bottom, "closed loop");
}

// 3 ------------------------------------------------------------------------------
void slow_flow_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::vector<SettleRequest> requests;
  std::vector<double> expect;
  std::vector<OscillatorParams> folds;
  for (int i = 0; i < 20; ++i) {
    SettleRequest r;
    r.params.q0 = 10.0;
    r.params.gamma3 = -4.0 + 3.5 * rng.uniform();
    r.params.gamma5 = 0.25 + 3.75 * rng.uniform();
    const double fold_p = 1.0 - r.params.gamma3 * r.params.gamma3 / (8.0 * r.params.gamma5);
    const double lo = std::max(0.0, fold_p);
    r.p = lo + (1.0 - lo) * (0.1 + 0.8 * rng.uniform());
    const auto roots = oracle::slow_flow_roots(r.params.gamma3, r.params.gamma5, r.p);
    // above the unstable branch
    r.x0 = 1.1 * roots.back();
    requests.push_back(r);
    expect.push_back(roots.back());
    if (fold_p > 0.05) folds.push_back(r.params);
  }
  const auto results = settle_batch(requests, 3000.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    worst = std::max(worst, results[i].diverged ? 1.0 : std::fabs(results[i].amplitude / expect[i] - 1.0));
  }
  const double step = 0.01;
  double worst_fold = 0.0;
  for (const OscillatorParams& p : folds) {
    const double fold_p = 1.0 - p.gamma3 * p.gamma3 / (8.0 * p.gamma5);
    const FoldScan s = fold_scan(p, fold_p, step, 5, 3000.0);
    worst_fold = std::max(worst_fold, std::isfinite(s.estimate) ? std::fabs(s.estimate - fold_p) : 1.0);
  }
  const double elapsed = seconds_since(t0);
  o.detail << "worst amplitude error=" << num(100.0 * worst) << "% over 20; worst fold offset=" << num(worst_fold)
           << " (grid " << step << ", " << folds.size() << " folds) runtime=" << num(elapsed) << "s";
  o.require(worst <= 0.03, "amplitude within 3%");
  o.require(worst_fold <= step, "fold within grid resolution");
  o.require(elapsed < 300.0, "runtime < 5 min");
}

// 4 ------------------------------------------------------------------------------
void effective_q_validation(Outcome& o) {
  PhysicalModelParams p;
  p.mass = 1.0;
  p.omega0 = 1.0;
  p.q0 = 100.0;
  p.tau = 1.0;
  const PhotothermalParams eq = photothermal_equivalent(p, 1.0);
  const double pc = critical_power(eq);
  std::vector<double> powers;
  for (double f : {0.2, 0.4, 0.6, 0.8}) powers.push_back(f * pc);
  const LinearityScan scan = qeff_linearity_scan(p, 1.0, powers);
  double worst = 0.0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double q_ring = 1.0 / scan.inverse_q[i];
    worst = std::max(worst, std::fabs(q_ring / effective_q(eq, powers[i]).q_eff - 1.0));
  }
  const double zc_err = scan.zero_crossing ? std::fabs(*scan.zero_crossing / pc - 1.0) : 1.0;
  o.detail << "worst ring-down Q error=" << num(100.0 * worst) << "% zero crossing error=" << num(100.0 * zc_err)
           << "%";
  o.require(worst <= 0.05, "ring-down Q within 5%");
  o.require(zc_err <= 0.05, "zero crossing within 5%");
}

// 5 ------------------------------------------------------------------------------
void thermal_noise(Outcome& o) {
  NoiseParams p;
  p.amplitude = 1e-9;
  p.bandwidth = 1.0;
  p.temperature = 10.0;
  p.f0 = 74083.0;
  p.q = 31000.0;
  p.c_l = 2.8;
  const double v = thermal_frequency_noise(p);
  const double ref = oracle::thermal_noise(1e-9, 1.380649e-23, 10.0, 1.0, 74083.0, 31000.0, 2.8);
  NoiseParams q18 = p, q60 = p;
  q18.q *= 18.0;
  q60.q *= 60.0;
  const double f18 = v / thermal_frequency_noise(q18);
  const double f60 = v / thermal_frequency_noise(q60);
  o.detail << "delta_f=" << cli::format_double(v) << " Hz factor(18)=" << num(f18) << " factor(60)=" << num(f60);
  o.require(std::fabs(v / 6.12e-3 - 1.0) <= 1e-3 && std::fabs(v / ref - 1.0) <= 1e-3, "6.12e-3 Hz within 0.1%");
  o.require(std::fabs(f18 - 4.24) < 0.005, "sqrt(18) = 4.24");
  o.require(std::fabs(f60 - 7.75) < 0.005 && std::round(f60) == 8.0, "sqrt(60) = 7.75, around eight");
}

// 6 ------------------------------------------------------------------------------
void fit_round_trips(Outcome& o) {
  auto worst_rel = [](const ResonanceParams& got, const oracle::Row& want) {
    double w = std::max({oracle::rel(got.a_max, want.a_max), oracle::rel(got.f0, want.f0),
                         oracle::rel(got.q_eff, want.q)});
    w = std::max(w, want.floor != 0.0 ? oracle::rel(got.a_floor, want.floor) : std::fabs(got.a_floor) / want.a_max);
    return w;
  };
  double worst = worst_rel(fit_resonance(oracle::synth_row(oracle::kRowA), FitProcedure::four_param).params,
                           oracle::kRowA);
  for (const auto* row : {&oracle::kRowB1, &oracle::kRowB2, &oracle::kRowB3}) {
    const ResonanceFit f =
        fit_resonance(oracle::synth_row(*row), FitProcedure::fixed_amax_scan_f0, {}, row->a_max);
    worst = std::max(worst, worst_rel(f.params, *row));
  }

  const Spectrum narrow = oracle::synth_row(oracle::kRowB3);
  const double peak = *std::max_element(narrow.amplitudes.begin(), narrow.amplitudes.end());
  const auto nonzero = std::count_if(narrow.amplitudes.begin(), narrow.amplitudes.end(),
                                     [&](double a) { return a > 1e-3 * peak; });
  double worst_narrow = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Spectrum s = oracle::synth_row(oracle::kRowB3, 0.02, seed);
    const ResonanceFit f = fit_resonance(s, FitProcedure::fixed_amax_scan_f0, {}, 1.02 * oracle::kRowB3.a_max);
    worst_narrow = std::max(worst_narrow, oracle::rel(f.params.q_eff, oracle::kRowB3.q));
  }

  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Spectrum s = oracle::synth_row_additive(oracle::kRowA, 0.05 * oracle::kRowA.floor, 1000 + seed);
    const ResonanceFit f = fit_resonance(s, FitProcedure::four_param);
    if (f.sd[kQ] && std::fabs(f.params.q_eff - oracle::kRowA.q) <= 1.96 * *f.sd[kQ]) ++covered;
  }
  o.detail << "worst round-trip error=" << cli::format_double(worst) << " narrow-peak bins=" << nonzero
           << " narrow-peak Q error=" << num(100.0 * worst_narrow) << "% coverage=" << covered << "/100";
  o.require(worst <= 1e-6, "round trips to 1e-6");
  o.require(nonzero > 10, "more than ten nonzero bins");
  o.require(worst_narrow <= 0.15, "narrow-peak Q within 15%");
  o.require(covered >= 90, "95% intervals cover >= 90/100");
}

// 7 ------------------------------------------------------------------------------
void dsp_chain(Outcome& o) {
  const double fs = 250e3;
  TimeTrace in;
  in.dt = 1.0 / fs;
  in.samples.resize(1 << 16);
  for (std::size_t i = 0; i < in.samples.size(); ++i) {
    in.samples[i] = std::cos(2.0 * oracle::kPi * 74083.0 * in.time_at(i));
  }
  MixOptions mix;
  mix.signal_freq = 74083.0;
  const Spectrum s = amplitude_spectrum(mix_and_lowpass(in, 70e3, 20e3, mix), WindowKind::hann);
  const auto peak_it = std::max_element(s.amplitudes.begin(), s.amplitudes.end());
  const double f_peak = s.frequency(static_cast<std::size_t>(peak_it - s.amplitudes.begin()));
  double image = 0.0;  // 144083 Hz folds to 105917 Hz
  for (std::size_t i = 0; i < s.amplitudes.size(); ++i) {
    if (std::fabs(s.frequency(i) - 105917.0) < 100.0) image = std::max(image, s.amplitudes[i]);
  }
  const double rejection = 20.0 * std::log10(*peak_it / image);

  Rng rng(99);
  TimeTrace noise;
  noise.dt = 1e-3;
  double ms = 0.0;
  for (int i = 0; i < 4096; ++i) {
    noise.samples.push_back(rng.normal());
    ms += noise.samples.back() * noise.samples.back();
  }
  ms /= 4096.0;
  const Spectrum ns = amplitude_spectrum(noise);
  double power = 0.0;
  for (std::size_t k = 0; k < ns.amplitudes.size(); ++k) {
    const bool unpaired = k == 0 || k == ns.amplitudes.size() - 1;
    power += (unpaired ? 1.0 : 0.5) * ns.amplitudes[k] * ns.amplitudes[k];
  }
  const double parseval = std::fabs(power / ms - 1.0);
  double dbv = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = std::pow(10.0, 12.0 * rng.uniform() - 6.0);
    dbv = std::max(dbv, std::fabs(dbv_to_veff(20.0 * std::log10(v)) / v - 1.0));
  }
  o.detail << "peak=" << num(f_peak) << " Hz (df " << num(s.df) << ") sum-band rejection=" << num(rejection)
           << " dB parseval=" << cli::format_double(parseval) << " dBV=" << cli::format_double(dbv);
  o.require(std::fabs(f_peak - 4083.0) <= s.df, "dominant 4083 Hz tone");
  o.require(rejection >= 40.0, "rejection >= 40 dB");
  o.require(parseval <= 1e-9, "Parseval to 1e-9");
  o.require(dbv <= 1e-12, "dBV round trip to 1e-12");
}

// 8 ------------------------------------------------------------------------------
void determinism(Outcome& o) {
  const std::map<std::string, std::string> commands = {
      {"sweep_hold.cfg", "sweep"}, {"sweep_collapse.cfg", "sweep"},      {"hysteresis.cfg", "hysteresis"},
      {"slowflow.cfg", "slowflow"},  {"noise.cfg", "noise"},       {"lissajous.cfg", "lissajous"},
      {"validate_q.cfg", "validate-q"}, {"spectrum_tone.cfg", "spectrum"}, {"resonance_a.cfg", "spectrum"},
      {"resonance_b3.cfg", "spectrum"}, {"fit_a.cfg", "fit"},       {"fit_b3.cfg", "fit"}};
  int checked = 0;
  std::vector<std::string> mismatched;
  for (const auto& entry : fs::directory_iterator(OPTOMECH_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    const auto it = commands.find(entry.path().filename().string());
    if (it == commands.end()) {
      mismatched.push_back(entry.path().filename().string() + " (no command)");
      continue;
    }
    std::vector<cli::OutputFile> runs[2];
    for (auto& files : runs) {
      cli::Config cfg = cli::Config::load(entry.path());
      files = cli::run_command(it->second, cfg, cli::CommandOptions{}).files;
    }
    const bool same = runs[0].size() == runs[1].size() &&
                      std::equal(runs[0].begin(), runs[0].end(), runs[1].begin(),
                                 [](const auto& a, const auto& b) { return a.name == b.name && a.content == b.content; });
    if (!same) mismatched.push_back(entry.path().filename().string());
    ++checked;
  }
  o.detail << checked << " bundled configs run twice";
  for (const auto& m : mismatched) o.detail << "; differs: " << m;
  o.require(checked == static_cast<int>(commands.size()) && mismatched.empty(), "byte-identical CSV");
}

// 9 ------------------------------------------------------------------------------
void property_suites(Outcome& o) {
  const std::vector<std::string> suites = {OPTOMECH_PROPERTY_SUITES};
  for (const std::string& path : suites) {
    const auto t0 = Clock::now();
    const std::string cmd = "\"" + path + "\" --minimal > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    const double elapsed = seconds_since(t0);
    o.detail << fs::path(path).filename().string() << "=" << (rc == 0 ? "ok" : "fail") << "/" << num(elapsed) << "s ";
    o.require(rc == 0, fs::path(path).filename().string() + " passes");
    o.require(elapsed < 30.0, fs::path(path).filename().string() + " < 30 s");
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"sweep above the fold", sweep_above_fold},
      {"collapse below the fold and hysteresis loop", sweep_below_fold},
      {"slow-flow oracle agreement", slow_flow_oracle},
      {"ring-down Q versus closed-form effective Q", effective_q_validation},
      {"thermal frequency noise", thermal_noise},
      {"resonance fit round trips", fit_round_trips},
      {"mixing and spectrum chain", dsp_chain},
      {"determinism of bundled configs", determinism},
      {"module property suites", property_suites},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
