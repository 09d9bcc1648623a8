#include "optomech/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "optomech/dsp.hpp"
#include "optomech/errors.hpp"
#include "optomech/experiments.hpp"
#include "optomech/fitting.hpp"
#include "optomech/integrate.hpp"
#include "optomech/model.hpp"
#include "optomech/optics.hpp"
#include "optomech/random.hpp"
#include "optomech/slowflow.hpp"

namespace optomech::cli {

namespace {

struct Emitter {
  const CommandOptions& options;
  CommandResult result;

  bool csv() const { return options.format != OutputFormat::svg; }
  bool svg() const { return options.format != OutputFormat::csv; }
  void add_csv(std::string name, std::string content) {
    if (csv()) result.files.push_back({std::move(name), std::move(content)});
  }
  void add_svg(std::string name, const std::function<std::string()>& render) {
    if (svg()) result.files.push_back({std::move(name), render()});
  }
  void line(const std::string& text) { result.summary += text + "\n"; }
};

std::string fmt(double v) { return format_double(v); }

OscillatorParams read_model(Config& c, DampingMode& mode) {
  mode = parse_damping_mode(c.text("model", "mode", "quintic"));
  OscillatorParams p;
  p.omega0 = c.number("model", "omega0", 1.0);
  p.q0 = c.number("model", "q0", 10.0);
  p.omega_m = c.number("model", "omega_m", p.omega0);
  p.gamma3 = c.number("model", "gamma3", -2.0);
  p.gamma5 = c.number("model", "gamma5", 1.0);
  p.alpha3 = c.number("model", "alpha3", 0.0);
  p.alpha5 = c.number("model", "alpha5", 0.0);
  p.f_m = c.number("model", "f_m", 1e-4);
  p.phi0 = c.number("model", "phi0", 0.0);
  p.validate();
  return p;
}

std::uint64_t read_seed(Config& c) { return c.unsigned_integer("integration", "seed", 1); }

double read_dt(Config& c, double omega_fast) {
  const double dt = c.number("integration", "dt", default_step(omega_fast));
  if (!(dt > 0.0)) throw ConfigError(c.where("integration", "dt") + ": must be > 0");
  check_step(dt, omega_fast);
  return dt;
}

// ---- sweep -------------------------------------------------------------------

void cmd_sweep(Config& c, Emitter& e) {
  DampingMode mode{};
  const OscillatorParams params = read_model(c, mode);
  const SweepSchedule def = SweepSchedule::up_down(1.2, 0.51);
  const SweepSchedule schedule(c.pairs("schedule", "breakpoints", def.breakpoints()));
  SweepOptions opt;
  opt.mode = mode;
  opt.initial_range = c.number("integration", "initial_range", 1e-3);
  const auto decimation = c.unsigned_integer("integration", "decimation", 10);
  if (decimation == 0) throw ConfigError(c.where("integration", "decimation") + ": must be >= 1");
  opt.decimation = static_cast<std::size_t>(decimation);
  opt.divergence_limit = c.number("integration", "divergence_limit", 1e6);
  const double dt = read_dt(c, std::max(params.omega0, params.omega_m));
  const std::uint64_t seed = read_seed(c);
  const double threshold = c.number("sweep", "onset_threshold", 0.5);
  c.check_unused();

  const SweepRecord rec = run_sweep(params, schedule, seed, dt, opt);

  e.add_csv("sweep_trace.csv", time_trace_csv(rec.trace));
  CsvWriter env({"t", "p", "envelope"});
  env.comment("dt=" + fmt(rec.envelope.dt));
  for (std::size_t i = 0; i < rec.envelope.samples.size(); ++i) {
    env.cell(rec.envelope.time_at(i)).cell(rec.p_of_t.samples[i]).cell(rec.envelope.samples[i]).end_row();
  }
  e.add_csv("sweep_envelope.csv", env.str());

  CsvWriter summary({"quantity", "p", "value"});
  const auto onset = sweep_onset(rec, threshold);
  summary.cell("onset").cell(onset ? fmt(*onset) : "").cell(onset ? fmt(*onset) : "none").end_row();
  e.line("onset p: " + (onset ? fmt(*onset) : std::string("none")));
  // Plateau of every constant-p hold: mean envelope over its final 10%.
  const auto& bp = schedule.breakpoints();
  for (std::size_t i = 1; i < bp.size(); ++i) {
    if (bp[i].second != bp[i - 1].second) continue;
    const double t1 = bp[i].first;
    const double t0 = t1 - 0.1 * (bp[i].first - bp[i - 1].first);
    const double level = mean_envelope(rec, t0, t1);
    summary.cell("plateau").cell(bp[i].second).cell(level).end_row();
    e.line("plateau envelope at p=" + fmt(bp[i].second) + ": " + fmt(level));
  }
  const double final_env = rec.envelope.samples.back();
  summary.cell("final_envelope").cell(rec.p_of_t.samples.back()).cell(final_env).end_row();
  e.line("final envelope: " + fmt(final_env));
  e.add_csv("sweep_summary.csv", summary.str());

  e.add_svg("sweep.svg", [&] {
    std::vector<double> t(rec.envelope.samples.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rec.envelope.time_at(i);
    return svg_plot("p sweep", "t", "envelope, p",
                    {{"envelope", t, rec.envelope.samples, false}, {"p", t, rec.p_of_t.samples, false}});
  });
}

// ---- slowflow ------------------------------------------------------------------

void cmd_slowflow(Config& c, Emitter& e) {
  DampingMode mode{};
  const OscillatorParams params = read_model(c, mode);
  const double p_min = c.number("slowflow", "p_min", 0.0);
  const double p_max = c.number("slowflow", "p_max", 1.3);
  const auto points = c.unsigned_integer("slowflow", "points", 131);
  c.check_unused();
  const double g5 = mode == DampingMode::vdp ? 0.0 : params.gamma5;

  const auto rows = branch_diagram(params.gamma3, g5, p_min, p_max, static_cast<std::size_t>(points));
  CsvWriter csv({"p", "amplitude", "stability"});
  for (const auto& r : rows) {
    csv.cell(r.p).cell(r.amplitude).cell(r.fold ? "fold" : (r.stable ? "stable" : "unstable")).end_row();
  }
  e.add_csv("slowflow.csv", csv.str());

  const BifurcationSummary s = classify(params.gamma3, g5);
  e.line(std::string("bifurcation: ") + to_string(s.kind) + " at p=" + fmt(s.hopf_p));
  if (s.fold_p) e.line("fold: p=" + fmt(*s.fold_p) + " amplitude=" + fmt(*s.fold_amplitude));

  e.add_svg("slowflow.svg", [&] {
    SvgSeries stable{"stable", {}, {}, true};
    SvgSeries unstable{"unstable", {}, {}, true};
    for (const auto& r : rows) {
      auto& s2 = r.stable ? stable : unstable;
      s2.x.push_back(r.p);
      s2.y.push_back(r.amplitude);
    }
    return svg_plot("branch diagram", "p", "amplitude", {stable, unstable});
  });
}

// ---- fit -------------------------------------------------------------------------

void cmd_fit(Config& c, Emitter& e) {
  if (e.options.input) c.set("fit", "input", e.options.input->string());
  if (e.options.procedure) c.set("fit", "procedure", *e.options.procedure);
  const auto input = c.optional_path("fit", "input");
  if (!input) throw ConfigError("fit: no input spectrum (set fit.input or pass --input)");
  const FitProcedure procedure = parse_fit_procedure(c.text("fit", "procedure", "four_param"));
  FitHints hints;
  hints.f0 = c.optional_number("fit", "f0");
  hints.q_eff = c.optional_number("fit", "q");
  hints.fixed_floor = c.number("fit", "floor", 0.0);
  const auto time_domain_amax = c.optional_number("fit", "a_max");
  FitOptions opt;
  opt.max_iterations = static_cast<int>(c.unsigned_integer("fit", "max_iterations", 200));
  opt.relative_tolerance = c.number("fit", "tolerance", 1e-10);
  opt.min_bins = static_cast<std::size_t>(c.unsigned_integer("fit", "min_bins", 5));
  c.check_unused();

  const Spectrum spectrum = read_spectrum(*input);
  const ResonanceFit fit = fit_resonance(spectrum, procedure, hints, time_domain_amax, opt);

  CsvWriter csv({"spectrum", "procedure", "a_max", "a_max_sd", "f0_hz", "f0_hz_sd", "q_eff", "q_eff_sd", "a_floor",
                 "a_floor_sd", "unit", "residual_norm", "iterations"});
  const auto sd = [&](ResonanceIndex i) { return fit.sd[i] ? fmt(*fit.sd[i]) : std::string(); };
  csv.cell(input->filename().string()).cell(to_string(procedure));
  csv.cell(fit.params.a_max).cell(sd(kAmax)).cell(fit.params.f0).cell(sd(kF0));
  csv.cell(fit.params.q_eff).cell(sd(kQ)).cell(fit.params.a_floor).cell(sd(kFloor));
  csv.cell(to_string(spectrum.unit)).cell(fit.residual_norm).cell(fmt(fit.iterations)).end_row();
  e.add_csv("fit.csv", csv.str());
  e.line("a_max=" + fmt(fit.params.a_max) + " f0=" + fmt(fit.params.f0) + " q_eff=" + fmt(fit.params.q_eff) +
         " a_floor=" + fmt(fit.params.a_floor));

  e.add_svg("fit.svg", [&] {
    SvgSeries data{"spectrum", spectrum.frequencies(), spectrum.amplitudes, true};
    SvgSeries model{"fit", data.x, {}, false};
    for (double f : model.x) model.y.push_back(eval_resonance(fit.params, f));
    return svg_plot("resonance fit", "f [Hz]", std::string("amplitude [") + to_string(spectrum.unit) + "]",
                    {data, model});
  });
}

// ---- spectrum --------------------------------------------------------------------

TimeTrace synth_tone(Config& c, std::uint64_t seed) {
  const double fs = c.number("spectrum", "sample_rate", 250e3);
  const double freq = c.number("spectrum", "tone_freq", 74083.0);
  const double amp = c.number("spectrum", "tone_amplitude", 1.0);
  const double phase = c.number("spectrum", "tone_phase", 0.0);
  const auto n = c.unsigned_integer("spectrum", "samples", 65536);
  const double noise = c.number("spectrum", "noise", 0.0);
  if (!(fs > 0.0) || n < 2) throw ConfigError("spectrum: sample_rate must be > 0 and samples >= 2");
  TimeTrace tr;
  tr.dt = 1.0 / fs;
  tr.source = "tone";
  Rng rng(seed);
  tr.samples.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    tr.samples[i] = amp * std::cos(2.0 * kPi * freq * tr.time_at(i) + phase);
    if (noise > 0.0) tr.samples[i] += noise * rng.normal();
  }
  return tr;
}

Spectrum synth_resonance(Config& c, std::uint64_t seed) {
  ResonanceParams r;
  r.a_max = c.number("spectrum", "a_max", 2.4e-2);
  r.f0 = c.number("spectrum", "f0", 74083.34);
  r.q_eff = c.number("spectrum", "q", 4.3e5);
  r.a_floor = c.number("spectrum", "floor", 1.4e-3);
  const double df = c.number("spectrum", "df", 0.1);
  const auto bins = c.unsigned_integer("spectrum", "bins", 401);
  const double f_start = c.number("spectrum", "f_start", r.f0 - df * static_cast<double>(bins / 2));
  const double noise = c.number("spectrum", "noise", 0.0);
  Spectrum s;
  s.unit = parse_amplitude_unit(c.text("spectrum", "unit", "nm"));
  s.f0_bin = f_start;
  s.df = df;
  s.amplitudes.resize(static_cast<std::size_t>(bins));
  Rng rng(seed);
  for (std::size_t i = 0; i < s.amplitudes.size(); ++i) {
    s.amplitudes[i] = eval_resonance(r, s.frequency(i));
    if (noise > 0.0) s.amplitudes[i] += noise * rng.normal();
  }
  s.validate();
  return s;
}

void cmd_spectrum(Config& c, Emitter& e) {
  if (e.options.input) c.set("spectrum", "input", e.options.input->string());
  const std::string source = c.text("spectrum", "source", c.has("spectrum", "input") ? "file" : "tone");
  const std::uint64_t seed = read_seed(c);
  Spectrum spectrum;
  if (source == "resonance") {
    spectrum = synth_resonance(c, seed);
  } else {
    TimeTrace trace;
    if (source == "file") {
      const auto input = c.optional_path("spectrum", "input");
      if (!input) throw ConfigError("spectrum: source = file needs spectrum.input");
      trace = read_time_trace(*input);
    } else if (source == "tone") {
      trace = synth_tone(c, seed);
    } else {
      throw ConfigError(c.where("spectrum", "source") + ": expected file, tone or resonance");
    }
    if (const auto ref = c.optional_number("spectrum", "ref_freq")) {
      const double cutoff = c.number("spectrum", "cutoff", 20e3);
      MixOptions mix;
      mix.signal_freq = c.optional_number("spectrum", "signal_freq");
      mix.transition = c.optional_number("spectrum", "transition");
      trace = mix_and_lowpass(trace, *ref, cutoff, mix);
      e.add_csv("mixed_trace.csv", time_trace_csv(trace));
    }
    const WindowKind window = parse_window(c.text("spectrum", "window", "rectangular"));
    const AmplitudeUnit unit = parse_amplitude_unit(c.text("spectrum", "unit", "Vpk"));
    spectrum = amplitude_spectrum(trace, window, unit);
  }
  if (c.boolean("spectrum", "calibrate", false)) {
    CalibrationConstants cal;
    cal.sensitivity_nm_per_vpp = c.number("spectrum", "sensitivity_nm_per_vpp", cal.sensitivity_nm_per_vpp);
    cal.amplification = c.number("spectrum", "amplification", cal.amplification);
    const double sign = c.number("spectrum", "slope_sign", 1.0);
    spectrum = calibrate_to_displacement(spectrum, cal, static_cast<int>(sign));
  }
  const auto f_min = c.optional_number("spectrum", "f_min");
  const auto f_max = c.optional_number("spectrum", "f_max");
  c.check_unused();
  if (f_min || f_max) {
    Spectrum cropped = spectrum;
    cropped.amplitudes.clear();
    bool first = true;
    for (std::size_t i = 0; i < spectrum.amplitudes.size(); ++i) {
      const double f = spectrum.frequency(i);
      if ((f_min && f < *f_min) || (f_max && f > *f_max)) continue;
      if (first) cropped.f0_bin = f;
      first = false;
      cropped.amplitudes.push_back(spectrum.amplitudes[i]);
    }
    if (cropped.amplitudes.size() < 2) throw ConfigError("spectrum: f_min/f_max leave fewer than two bins");
    spectrum = std::move(cropped);
  }
  e.add_csv("spectrum.csv", spectrum_csv(spectrum));
  const auto peak = static_cast<std::size_t>(
      std::max_element(spectrum.amplitudes.begin(), spectrum.amplitudes.end()) - spectrum.amplitudes.begin());
  e.line("peak: f=" + fmt(spectrum.frequency(peak)) + " Hz amplitude=" + fmt(spectrum.amplitudes[peak]) + " " +
         to_string(spectrum.unit));
  e.add_svg("spectrum.svg", [&] {
    return svg_plot("amplitude spectrum", "f [Hz]", std::string("amplitude [") + to_string(spectrum.unit) + "]",
                    {{"spectrum", spectrum.frequencies(), spectrum.amplitudes, false}});
  });
}

// ---- noise -------------------------------------------------------------------------

void cmd_noise(Config& c, Emitter& e) {
  NoiseParams p;
  p.amplitude = c.number("noise", "amplitude", p.amplitude);
  p.bandwidth = c.number("noise", "bandwidth", p.bandwidth);
  p.temperature = c.number("noise", "temperature", p.temperature);
  p.f0 = c.number("noise", "f0", p.f0);
  p.q = c.number("noise", "q", p.q);
  p.c_l = c.number("noise", "c_l", p.c_l);
  const auto ratios = c.numbers("noise", "q_ratios", {18.0, 60.0});
  c.check_unused();
  const double df = thermal_frequency_noise(p);
  CsvWriter csv({"quantity", "value", "unit"});
  csv.cell("delta_f_rms").cell(df).cell("Hz").end_row();
  e.line("delta_f_rms = " + fmt(df) + " Hz");
  for (double r : ratios) {
    NoiseParams boosted = p;
    boosted.q = p.q * r;
    const double factor = df / thermal_frequency_noise(boosted);
    csv.cell("reduction_for_q_x" + fmt(r)).cell(factor).cell("1").end_row();
    e.line("Q x" + fmt(r) + " reduces the noise by " + fmt(factor));
  }
  e.add_csv("noise.csv", csv.str());
}

// ---- lissajous ------------------------------------------------------------------------

void cmd_lissajous(Config& c, Emitter& e) {
  LissajousParams p;
  p.interferometer.wavelength = c.number("interferometer", "wavelength", p.interferometer.wavelength);
  p.interferometer.visibility = c.number("interferometer", "visibility", p.interferometer.visibility);
  p.interferometer.mean_intensity = c.number("interferometer", "mean_intensity", p.interferometer.mean_intensity);
  p.mean_inverse_q = c.number("lissajous", "mean_inverse_q", p.mean_inverse_q);
  p.samples = static_cast<std::size_t>(c.unsigned_integer("lissajous", "samples", p.samples));
  const double phase = c.number("lissajous", "phase", kPi / 2.0);
  const double depth = c.number("lissajous", "depth", 0.5 * p.mean_inverse_q);
  c.check_unused();
  const LissajousCurve curve = lissajous_curve(phase, depth, p);
  CsvWriter csv({"slope", "inverse_q"});
  const char* shape = curve.shape == LissajousShape::line ? "line" : "oval";
  csv.comment(std::string("shape=") + shape);
  csv.comment("area=" + fmt(curve.enclosed_area));
  for (const auto& pt : curve.points) csv.cell(pt.slope).cell(pt.inverse_q).end_row();
  e.add_csv("lissajous.csv", csv.str());
  e.line(std::string("shape: ") + shape + ", enclosed area " + fmt(curve.enclosed_area));
  e.add_svg("lissajous.svg", [&] {
    SvgSeries s{"1/Q vs slope", {}, {}, false};
    for (const auto& pt : curve.points) {
      s.x.push_back(pt.slope);
      s.y.push_back(pt.inverse_q);
    }
    return svg_plot("Lissajous figure", "dI/dD", "1/Q", {s});
  });
}

// ---- hysteresis ------------------------------------------------------------------------

const std::vector<double> kDefaultGrid = {0.0, 0.1, 0.2,  0.3, 0.4, 0.45, 0.495, 0.51, 0.52,
                                          0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 1.05,  1.1,  1.2};

void cmd_hysteresis(Config& c, Emitter& e) {
  DampingMode mode{};
  const OscillatorParams params = read_model(c, mode);
  const auto grid = c.numbers("hysteresis", "p_grid", kDefaultGrid);
  const double dwell = c.number("hysteresis", "dwell", 1000.0);
  HysteresisOptions opt;
  opt.mode = mode;
  opt.measure_q = c.boolean("hysteresis", "measure_q", true);
  opt.kick = c.number("hysteresis", "kick", opt.kick);
  opt.perturbation = c.number("hysteresis", "perturbation", opt.perturbation);
  opt.initial_range = c.number("integration", "initial_range", opt.initial_range);
  opt.dt = read_dt(c, std::max(params.omega0, params.omega_m));
  const std::uint64_t seed = read_seed(c);
  c.check_unused();

  const HysteresisCurve curve = hysteresis_experiment(params, grid, dwell, seed, opt);
  CsvWriter csv({"direction", "control", "amplitude", "q_eff", "settled_flag"});
  csv.comment("model: " + curve.model);
  csv.comment("schedule: " + curve.schedule);
  csv.comment("seed: " + std::to_string(curve.seed));
  for (const auto* branch : {&curve.up_branch, &curve.down_branch}) {
    for (const auto& p : *branch) {
      csv.cell(to_string(p.direction)).cell(p.control).cell(p.amplitude).cell(p.q_eff).cell(p.settled ? "1" : "0");
      csv.end_row();
    }
  }
  e.add_csv("hysteresis.csv", csv.str());
  const double area = loop_area(curve);
  CsvWriter jumps({"jump_up", "jump_down", "loop_area", "seed"});
  jumps.cell(curve.jump_up ? fmt(*curve.jump_up) : "").cell(curve.jump_down ? fmt(*curve.jump_down) : "");
  jumps.cell(area).cell(std::to_string(seed)).end_row();
  e.add_csv("hysteresis_jumps.csv", jumps.str());
  e.line("jump_up: " + (curve.jump_up ? fmt(*curve.jump_up) : std::string("none")));
  e.line("jump_down: " + (curve.jump_down ? fmt(*curve.jump_down) : std::string("none")));
  e.line("loop area: " + fmt(area));
  e.add_svg("hysteresis.svg", [&] {
    SvgSeries up{"up", {}, {}, false};
    SvgSeries down{"down", {}, {}, false};
    for (const auto& p : curve.up_branch) {
      up.x.push_back(p.control);
      up.y.push_back(p.amplitude);
    }
    for (const auto& p : curve.down_branch) {
      down.x.push_back(p.control);
      down.y.push_back(p.amplitude);
    }
    return svg_plot("amplitude hysteresis", "p", "amplitude", {up, down});
  });
}

// ---- validate-q ----------------------------------------------------------------------------

void cmd_validate_q(Config& c, Emitter& e) {
  PhysicalModelParams p;
  p.mass = c.number("physical", "mass", p.mass);
  p.omega0 = c.number("physical", "omega0", p.omega0);
  p.q0 = c.number("physical", "q0", p.q0);
  p.tau = c.number("physical", "tau", p.tau);
  p.f_rad = c.number("physical", "f_rad", p.f_rad);
  p.working_point = c.number("physical", "working_point", p.working_point);
  p.fringe_phase = c.number("physical", "fringe_phase", p.fringe_phase);
  p.fringe.wavelength = c.number("physical", "wavelength", p.fringe.wavelength);
  p.fringe.visibility = c.number("physical", "visibility", p.fringe.visibility);
  const double force_per_watt = c.number("validate", "force_per_watt", 1.0);
  const auto fractions = c.numbers("validate", "fractions", {0.2, 0.4, 0.6, 0.8});
  RingdownProtocol protocol;
  protocol.initial_amplitude = c.number("validate", "initial_amplitude", protocol.initial_amplitude);
  protocol.decay_times = c.number("validate", "decay_times", protocol.decay_times);
  protocol.dt = read_dt(c, p.omega0);
  c.check_unused();
  p.validate();

  const PhotothermalParams equiv = photothermal_equivalent(p, force_per_watt);
  const double p_crit = critical_power(equiv);
  if (!std::isfinite(p_crit)) throw ConfigError("validate-q: the working point gives no anti-damping (P_crit infinite)");
  std::vector<double> powers;
  for (double f : fractions) powers.push_back(f * p_crit);

  CsvWriter rows({"power", "fraction", "q_formula", "q_ringdown", "relative_error"});
  std::vector<double> inverse_q;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    PhysicalModelParams run = p;
    run.photothermal_amplitude = force_per_watt * powers[i];
    const double q_formula = effective_q(equiv, powers[i]).q_eff;
    const double q_ring = measure_physical_q(run, q_formula, protocol).q;
    inverse_q.push_back(1.0 / q_ring);
    rows.cell(powers[i]).cell(fractions[i]).cell(q_formula).cell(q_ring).cell(q_ring / q_formula - 1.0).end_row();
    e.line("P=" + fmt(fractions[i]) + " P_crit: Q formula " + fmt(q_formula) + ", ring-down " + fmt(q_ring));
  }
  e.add_csv("validate_q.csv", rows.str());
  const LinearityScan line = fit_inverse_q_line(powers, inverse_q);
  CsvWriter summary({"slope", "intercept", "residual", "zero_crossing", "critical_power", "relative_error"});
  const double zc = line.zero_crossing.value_or(std::nan(""));
  summary.cell(line.slope).cell(line.intercept).cell(line.residual).cell(zc).cell(p_crit).cell(zc / p_crit - 1.0);
  summary.end_row();
  e.add_csv("validate_q_line.csv", summary.str());
  e.line("zero crossing " + fmt(zc) + " vs critical power " + fmt(p_crit));
  e.add_svg("validate_q.svg", [&] {
    SvgSeries ring{"ring-down", powers, inverse_q, true};
    SvgSeries formula{"formula", powers, {}, false};
    for (double pw : powers) formula.y.push_back(effective_q(equiv, pw).inverse_q);
    return svg_plot("1/Q_eff vs power", "P", "1/Q_eff", {ring, formula});
  });
}

using Handler = void (*)(Config&, Emitter&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = {
      {"sweep", cmd_sweep},         {"slowflow", cmd_slowflow},     {"fit", cmd_fit},
      {"spectrum", cmd_spectrum},   {"noise", cmd_noise},           {"lissajous", cmd_lissajous},
      {"hysteresis", cmd_hysteresis}, {"validate-q", cmd_validate_q},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : handlers()) n.push_back(k);
    return n;
  }();
  return names;
}

CommandResult run_command(const std::string& name, Config& config, const CommandOptions& options) {
  const auto it = handlers().find(name);
  if (it == handlers().end()) throw ConfigError("unknown command '" + name + "'");
  if (options.seed) config.set("integration", "seed", std::to_string(*options.seed));
  Emitter e{options, {}};
  it->second(config, e);
  e.result.files.push_back({name + ".effective.cfg", config.effective()});
  return std::move(e.result);
}

int exit_code(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const InputError*>(&error) ||
      dynamic_cast<const DomainError*>(&error) || dynamic_cast<const UnitError*>(&error)) {
    return 2;
  }
  if (dynamic_cast<const DivergenceError*>(&error) || dynamic_cast<const EvaluationError*>(&error)) return 3;
  if (dynamic_cast<const FitError*>(&error)) return 4;
  return 1;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optomechanical self-oscillation toolkit"};
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string format = "csv";
  std::string input;
  std::string procedure;
  bool verbose = false;
  app.add_option("command", command, "sweep | slowflow | fit | spectrum | noise | lissajous | hysteresis | validate-q")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "INI-style configuration file");
  app.add_option("--out-dir", out_dir, "directory for the CSV/SVG outputs");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides integration.seed)");
  app.add_option("--format", format, "csv, svg or both")->check(CLI::IsMember({"csv", "svg", "both"}));
  auto* input_opt = app.add_option("--input", input, "input file for fit / spectrum");
  auto* procedure_opt = app.add_option("--procedure", procedure, "fit procedure");
  app.add_flag("--verbose", verbose, "print the effective configuration");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  CommandOptions options;
  options.out_dir = out_dir;
  if (*seed_opt) options.seed = seed;
  options.format = format == "svg" ? OutputFormat::svg : (format == "both" ? OutputFormat::both : OutputFormat::csv);
  options.verbose = verbose;
  if (*input_opt) options.input = std::filesystem::absolute(input);
  if (*procedure_opt) options.procedure = procedure;

  try {
    Config config = config_path.empty() ? Config() : Config::load(config_path);
    CommandResult result = run_command(command, config, options);
    write_outputs(options.out_dir, result.files);
    if (verbose) out << config.effective();
    out << result.summary;
    return 0;
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
    if (!e.best_so_far().empty()) err << "best so far: " << e.best_so_far() << '\n';
    return exit_code(e);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (t=" << format_double(e.time()) << ")\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  }
}

}  // namespace optomech::cli
