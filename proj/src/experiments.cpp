#include "optomech/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "optomech/errors.hpp"
#include "optomech/kernels.hpp"
#include "optomech/slowflow.hpp"

namespace optomech {

const char* to_string(SweepDirection direction) { return direction == SweepDirection::up ? "up" : "down"; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void load_lane(kernels::OscillatorBatch& b, std::size_t i, const OscillatorParams& params, DampingMode mode,
               double p, double x, double v) {
  b.x[i] = x;
  b.v[i] = v;
  b.damping[i] = params.linear_damping();
  b.one_minus_p[i] = 1.0 - p;
  b.g3[i] = params.gamma3;
  b.g5[i] = mode == DampingMode::vdp ? 0.0 : params.gamma5;
  b.a3[i] = mode == DampingMode::general ? params.alpha3 : 0.0;
  b.a5[i] = mode == DampingMode::general ? params.alpha5 : 0.0;
  b.wm2[i] = params.omega_m * params.omega_m;
  b.fm[i] = params.f_m;
  b.omega0[i] = params.omega0;
  b.phi0[i] = params.phi0;
  b.max_abs_x[i] = 0.0;
  b.diverged[i] = 0;
}

/// Runs `chunks` blocks of `chunk_steps` RK4 steps; env[lane][c] is the max
/// |x| seen during block c.
std::vector<std::vector<double>> run_chunks(kernels::OscillatorBatch& b, std::size_t chunk_steps,
                                            std::size_t chunks, double dt, double limit) {
  std::vector<std::vector<double>> env(b.size(), std::vector<double>(chunks, 0.0));
  for (std::size_t c = 0; c < chunks; ++c) {
    std::fill(b.max_abs_x.begin(), b.max_abs_x.end(), 0.0);
    kernels::rk4_polynomial(b, chunk_steps, dt, limit);
    for (std::size_t i = 0; i < b.size(); ++i) env[i][c] = b.max_abs_x[i];
  }
  return env;
}

struct Peak {
  double time;
  double height;
};

struct ProbeTrace {
  std::vector<std::vector<double>> amplitude;  // sqrt(x² + (v/omega0)²) at block ends
  std::vector<std::vector<Peak>> peaks;
};

/// Batch with every lane duplicated: lane i and lane n + i start identical.
kernels::OscillatorBatch doubled(const kernels::OscillatorBatch& b) {
  kernels::OscillatorBatch d = b;
  auto twice = [](auto& v) { v.insert(v.end(), v.begin(), v.end()); };
  twice(d.x);
  twice(d.v);
  twice(d.damping);
  twice(d.one_minus_p);
  twice(d.g3);
  twice(d.g5);
  twice(d.a3);
  twice(d.a5);
  twice(d.wm2);
  twice(d.fm);
  twice(d.omega0);
  twice(d.phi0);
  twice(d.max_abs_x);
  twice(d.diverged);
  return d;
}

/// Runs a doubled batch in blocks of `chunk_steps`. Records the block-end
/// amplitude of the first n lanes and the parabola-refined |x| peak of every
/// half cycle of all lanes.
ProbeTrace run_probe(kernels::OscillatorBatch& b, std::size_t n, std::size_t chunk_steps, std::size_t chunks,
                     double dt, double limit) {
  ProbeTrace out;
  out.amplitude.assign(n, std::vector<double>(chunks, 0.0));
  out.peaks.assign(b.size(), {});
  std::vector<double> y0(b.size()), y1(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) y0[i] = y1[i] = std::fabs(b.x[i]);
  std::size_t step = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < chunk_steps; ++k, ++step) {
      kernels::rk4_polynomial(b, 1, dt, limit);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double y2 = std::fabs(b.x[i]);
        const double curv = y0[i] - 2.0 * y1[i] + y2;
        if (step >= 2 && y1[i] >= y0[i] && y1[i] > y2 && curv < 0.0) {
          const double shift = 0.5 * (y0[i] - y2) / curv;
          out.peaks[i].push_back({(static_cast<double>(step) + shift) * dt,
                                  y1[i] - 0.125 * (y0[i] - y2) * (y0[i] - y2) / curv});
        }
        y0[i] = y1[i];
        y1[i] = y2;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out.amplitude[i][c] = std::hypot(b.x[i], b.v[i] / b.omega0[i]);
  }
  return out;
}

/// Decay rate of |peak - reference peak| fitted in log space over the leading
/// peaks whose gap stays above `stop_fraction` of the first one.
std::optional<double> peak_gap_rate(const std::vector<Peak>& probe, const std::vector<Peak>& reference,
                                    double stop_fraction) {
  const std::size_t n = std::min(probe.size(), reference.size());
  std::vector<double> t, y;
  for (std::size_t k = 0; k < n; ++k) {
    const double gap = std::fabs(probe[k].height - reference[k].height);
    if (!(gap > 0.0) || (!y.empty() && gap <= stop_fraction * std::exp(y.front()))) break;
    t.push_back(probe[k].time);
    y.push_back(std::log(gap));
  }
  if (t.size() < 3) return std::nullopt;
  const double m = static_cast<double>(t.size());
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / m;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    sxy += (t[k] - tm) * (y[k] - ym);
    sxx += (t[k] - tm) * (t[k] - tm);
  }
  return -sxy / sxx;
}

double mean_tail(const std::vector<double>& v, double fraction) {
  const std::size_t n = v.size();
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  double sum = 0.0;
  for (std::size_t i = n - k; i < n; ++i) sum += v[i];
  return sum / static_cast<double>(k);
}

bool drift_ok(const std::vector<double>& v, double amplitude) {
  const std::size_t n = v.size();
  const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n))));
  if (n < k) return false;
  const double drift = std::fabs(v[n - 1] - v[n - k]);
  return drift <= 0.01 * std::fabs(amplitude);
}

std::size_t steps_per_period(double omega, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(2.0 * kPi / omega / dt)));
}

std::size_t chunk_count(double duration, double chunk_time) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / chunk_time - 1e-9)));
}

/// Log-linear rate of the leading samples for which keep(sample) holds.
std::optional<double> leading_rate(const std::vector<double>& values, double dt, double t0,
                                   const std::function<bool(double)>& keep) {
  TimeTrace tr;
  tr.t0 = t0;
  tr.dt = dt;
  for (double v : values) {
    if (!keep(v) || !(v > 0.0)) break;
    tr.samples.push_back(v);
  }
  if (tr.samples.size() < 2) return std::nullopt;
  if (tr.samples.size() == 2) return std::log(tr.samples[0] / tr.samples[1]) / dt;
  try {
    RingdownOptions opt;
    opt.allow_growth = true;
    const RingdownFit fit = fit_ringdown(tr, 1.0, opt);
    if (fit.diverged) return 0.0;
    return fit.decay_rate;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string describe_model(const OscillatorParams& p, DampingMode mode) {
  std::ostringstream os;
  os.precision(12);
  os << "polynomial " << to_string(mode) << " omega0=" << p.omega0 << " q0=" << p.q0 << " omega_m=" << p.omega_m
     << " gamma3=" << p.gamma3 << " gamma5=" << p.gamma5 << " alpha3=" << p.alpha3 << " alpha5=" << p.alpha5
     << " f_m=" << p.f_m;
  return os.str();
}

}  // namespace

std::vector<HysteresisCurve> hysteresis_experiments(const OscillatorParams& params, std::span<const double> p_grid,
                                                    double dwell_time, std::span<const std::uint64_t> seeds,
                                                    const HysteresisOptions& options) {
  params.validate();
  if (p_grid.size() < 3) throw ConfigError("hysteresis: p grid needs at least three values");
  if (p_grid.front() != 0.0) throw ConfigError("hysteresis: p grid must start at 0");
  for (std::size_t i = 1; i < p_grid.size(); ++i) {
    if (!(p_grid[i] > p_grid[i - 1])) throw ConfigError("hysteresis: p grid must be strictly increasing");
  }
  if (!(p_grid.back() > 1.0)) throw ConfigError("hysteresis: p grid must extend beyond p = 1");
  const double decay_time = 2.0 * params.q0 / params.omega0;
  if (!(dwell_time >= 50.0 * decay_time)) {
    std::ostringstream os;
    os << "hysteresis: dwell time " << dwell_time << " is shorter than 50 decay times (" << 50.0 * decay_time << ")";
    throw ConfigError(os.str());
  }
  if (seeds.empty()) throw ConfigError("hysteresis: no seeds");

  const double omega_fast = std::max(params.omega0, params.omega_m);
  const double dt = options.dt > 0.0 ? options.dt : default_step(omega_fast);
  check_step(dt, omega_fast);
  const std::size_t chunk = steps_per_period(params.omega0, dt);
  const double chunk_time = static_cast<double>(chunk) * dt;
  const std::size_t dwell_chunks = chunk_count(dwell_time, chunk_time);
  const std::size_t probe_chunks = chunk_count(options.probe_fraction * dwell_time, chunk_time);

  const std::size_t lanes = seeds.size();
  kernels::OscillatorBatch batch(lanes);
  for (std::size_t i = 0; i < lanes; ++i) {
    const auto [x0, v0] = random_initial_condition(seeds[i], options.initial_range);
    load_lane(batch, i, params, options.mode, 0.0, x0, v0);
  }

  std::vector<HysteresisCurve> curves(lanes);
  {
    std::ostringstream sched;
    sched.precision(12);
    sched << "grid n=" << p_grid.size() << " p_max=" << p_grid.back() << " dwell=" << dwell_time << " dt=" << dt;
    for (std::size_t i = 0; i < lanes; ++i) {
      curves[i].model = describe_model(params, options.mode);
      curves[i].schedule = sched.str();
      curves[i].seed = seeds[i];
    }
  }

  const auto step = [&](SweepDirection dir, double p) {
    std::fill(batch.one_minus_p.begin(), batch.one_minus_p.end(), 1.0 - p);
    const auto env = run_chunks(batch, chunk, dwell_chunks, dt, options.divergence_limit);
    std::vector<HysteresisPoint> points(lanes);
    for (std::size_t i = 0; i < lanes; ++i) {
      if (batch.diverged[i]) {
        std::ostringstream os;
        os << "hysteresis: lane " << i << " diverged at p=" << p;
        throw DivergenceError(os.str(), batch.t + static_cast<double>(batch.steps_taken) * dt);
      }
      HysteresisPoint& pt = points[i];
      pt.direction = dir;
      pt.control = p;
      pt.amplitude = mean_tail(env[i], 0.1);
      pt.settled = drift_ok(env[i], pt.amplitude);
      pt.q_eff = kNaN;
    }
    if (options.measure_q) {
      // Lanes [0, n) are probed, lanes [n, 2n) run unperturbed as reference.
      kernels::OscillatorBatch probe = doubled(batch);
      std::vector<bool> lower(lanes);
      for (std::size_t i = 0; i < lanes; ++i) {
        probe.fm[i] = probe.fm[lanes + i] = 0.0;
        lower[i] = points[i].amplitude < options.lower_branch_limit;
        if (lower[i]) {
          probe.x[i] = options.kick;
          probe.v[i] = 0.0;
        } else {
          probe.x[i] *= 1.0 + options.perturbation;
          probe.v[i] *= 1.0 + options.perturbation;
        }
      }
      const auto penv = run_probe(probe, lanes, chunk, probe_chunks, dt, options.divergence_limit);
      for (std::size_t i = 0; i < lanes; ++i) {
        std::optional<double> rate;
        if (lower[i]) {
          const double cap = 3.0 * options.kick;
          rate = leading_rate(penv.amplitude[i], chunk_time, 0.0, [cap](double v) { return v <= cap; });
        } else if (!probe.diverged[i] && !probe.diverged[lanes + i]) {
          // peak heights are phase free, so the neutral phase shift of the kick drops out
          rate = peak_gap_rate(penv.peaks[i], penv.peaks[lanes + i], 1e-3);
        }
        if (rate) {
          points[i].q_eff = *rate == 0.0 ? std::numeric_limits<double>::infinity() : params.omega0 / (2.0 * *rate);
        }
      }
    }
    for (std::size_t i = 0; i < lanes; ++i) {
      (dir == SweepDirection::up ? curves[i].up_branch : curves[i].down_branch).push_back(points[i]);
    }
  };

  for (double p : p_grid) step(SweepDirection::up, p);
  for (std::size_t k = p_grid.size(); k-- > 0;) step(SweepDirection::down, p_grid[k]);

  for (HysteresisCurve& c : curves) {
    std::tie(c.jump_up, c.jump_down) = detect_jumps(c.up_branch, c.down_branch);
  }
  return curves;
}

HysteresisCurve hysteresis_experiment(const OscillatorParams& params, std::span<const double> p_grid,
                                      double dwell_time, std::uint64_t seed, const HysteresisOptions& options) {
  const std::uint64_t seeds[] = {seed};
  return std::move(hysteresis_experiments(params, p_grid, dwell_time, seeds, options).front());
}

std::pair<std::optional<double>, std::optional<double>> detect_jumps(std::span<const HysteresisPoint> up_branch,
                                                                     std::span<const HysteresisPoint> down_branch,
                                                                     double ratio) {
  if (up_branch.size() < 3 || down_branch.size() < 3) {
    throw InputError("detect_jumps: each branch needs at least three points");
  }
  std::pair<std::optional<double>, std::optional<double>> out;
  for (std::size_t i = 0; i + 1 < up_branch.size(); ++i) {
    const double a = up_branch[i].amplitude;
    const double b = up_branch[i + 1].amplitude;
    if (b > 0.0 && b > ratio * a) {
      out.first = 0.5 * (up_branch[i].control + up_branch[i + 1].control);
      break;
    }
  }
  for (std::size_t i = 0; i + 1 < down_branch.size(); ++i) {
    const double a = down_branch[i].amplitude;
    const double b = down_branch[i + 1].amplitude;
    if (a > 0.0 && a > ratio * b) {
      out.second = 0.5 * (down_branch[i].control + down_branch[i + 1].control);
      break;
    }
  }
  return out;
}

double loop_area(const HysteresisCurve& curve) {
  std::map<double, double> up;
  for (const auto& p : curve.up_branch) up[p.control] = p.amplitude;
  std::vector<std::pair<double, double>> diff;
  for (const auto& p : curve.down_branch) {
    const auto it = up.find(p.control);
    if (it != up.end()) diff.emplace_back(p.control, p.amplitude * p.amplitude - it->second * it->second);
  }
  std::sort(diff.begin(), diff.end());
  double area = 0.0;
  for (std::size_t i = 1; i < diff.size(); ++i) {
    area += 0.5 * (diff[i].second + diff[i - 1].second) * (diff[i].first - diff[i - 1].first);
  }
  return area;
}

std::vector<SettleResult> settle_batch(std::span<const SettleRequest> requests, double duration, double dt) {
  if (requests.empty()) return {};
  if (!(duration > 0.0)) throw ConfigError("settle: duration must be > 0");
  double omega_fast = 0.0;
  double omega_slow = std::numeric_limits<double>::infinity();
  for (const auto& r : requests) {
    r.params.validate();
    SweepControl{r.p}.validate();
    omega_fast = std::max({omega_fast, r.params.omega0, r.params.omega_m});
    omega_slow = std::min(omega_slow, r.params.omega0);
  }
  if (!(dt > 0.0)) dt = default_step(omega_fast);
  check_step(dt, omega_fast);
  kernels::OscillatorBatch batch(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    load_lane(batch, i, r.params, r.mode, r.p, r.x0, r.v0);
  }
  const std::size_t chunk = steps_per_period(omega_slow, dt);
  const auto env = run_chunks(batch, chunk, chunk_count(duration, static_cast<double>(chunk) * dt), dt, 1e6);
  std::vector<SettleResult> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    out[i].diverged = batch.diverged[i] != 0;
    out[i].amplitude = out[i].diverged ? std::numeric_limits<double>::infinity() : mean_tail(env[i], 0.1);
    out[i].settled = !out[i].diverged && drift_ok(env[i], out[i].amplitude);
  }
  return out;
}

FoldScan fold_scan(const OscillatorParams& params, double p_centre, double step, int half_width, double duration,
                   double dt) {
  if (!(step > 0.0) || half_width < 1) throw ConfigError("fold scan: step must be > 0 and half_width >= 1");
  const FoldPoint fold = fold_point(params.gamma3, params.gamma5);
  std::vector<SettleRequest> requests;
  for (int k = -half_width; k < half_width; ++k) {
    const double p = p_centre + (static_cast<double>(k) + 0.5) * step;
    if (p < 0.0) continue;
    requests.push_back({params, DampingMode::quintic, p, fold.amplitude, 0.0});
  }
  const auto results = settle_batch(requests, duration, dt);
  FoldScan scan{kNaN, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double p = requests[i].p;
    if (!results[i].diverged && results[i].amplitude > 0.5 * fold.amplitude) {
      scan.lowest_survivor = std::min(scan.lowest_survivor, p);
    } else {
      scan.highest_collapse = std::max(scan.highest_collapse, p);
    }
  }
  if (std::isfinite(scan.lowest_survivor) && std::isfinite(scan.highest_collapse)) {
    scan.estimate = 0.5 * (scan.lowest_survivor + scan.highest_collapse);
  }
  return scan;
}

std::optional<double> sweep_onset(const SweepRecord& record, double threshold) {
  const auto& env = record.envelope.samples;
  for (std::size_t i = 0; i < env.size(); ++i) {
    if (env[i] > threshold) return record.p_of_t.samples.at(i);
  }
  return std::nullopt;
}

double mean_envelope(const SweepRecord& record, double t_begin, double t_end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < record.envelope.samples.size(); ++i) {
    const double t = record.envelope.time_at(i);
    if (t >= t_begin && t <= t_end) {
      sum += record.envelope.samples[i];
      ++n;
    }
  }
  if (n == 0) throw InputError("mean_envelope: window contains no samples");
  return sum / static_cast<double>(n);
}

LinearityScan fit_inverse_q_line(std::vector<double> power, std::vector<double> inverse_q) {
  if (power.size() != inverse_q.size() || power.size() < 2) {
    throw InputError("linearity scan: need at least two (P, 1/Q) pairs");
  }
  LinearityScan s;
  const double n = static_cast<double>(power.size());
  double pm = 0.0;
  double ym = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    pm += power[i];
    ym += inverse_q[i];
  }
  pm /= n;
  ym /= n;
  double spp = 0.0;
  double spy = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    spp += (power[i] - pm) * (power[i] - pm);
    spy += (power[i] - pm) * (inverse_q[i] - ym);
  }
  if (!(spp > 0.0)) throw InputError("linearity scan: powers must not all coincide");
  s.slope = spy / spp;
  s.intercept = ym - s.slope * pm;
  double sse = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    const double r = inverse_q[i] - (s.intercept + s.slope * power[i]);
    sse += r * r;
  }
  s.residual = std::sqrt(sse / n);
  if (s.slope != 0.0) s.zero_crossing = -s.intercept / s.slope;
  s.power = std::move(power);
  s.inverse_q = std::move(inverse_q);
  return s;
}

LinearityScan qeff_linearity_scan(const PhotothermalParams& params, std::span<const double> powers) {
  std::vector<double> inv;
  for (double p : powers) inv.push_back(effective_q(params, p).inverse_q);
  return fit_inverse_q_line({powers.begin(), powers.end()}, std::move(inv));
}

PhysicalRingdown measure_physical_q(const PhysicalModelParams& params, double q_estimate,
                                    const RingdownProtocol& protocol) {
  params.validate();
  const double dt = protocol.dt > 0.0 ? protocol.dt : default_step(params.omega0);
  double duration = protocol.min_duration / params.omega0;
  if (std::isfinite(q_estimate)) {
    duration = std::max(duration, protocol.decay_times * 2.0 * std::fabs(q_estimate) / params.omega0);
  }
  const TimeTrace trace = run_ringdown(params, protocol.initial_amplitude, duration, dt);
  const std::size_t window = steps_per_period(params.omega0, dt);
  // Skip two periods while the photothermal force relaxes onto the motion.
  const std::size_t skip = 2;
  PhysicalRingdown out{};
  out.envelope.dt = static_cast<double>(window) * dt;
  out.envelope.t0 = trace.t0 + (static_cast<double>(skip * window) + 0.5 * static_cast<double>(window - 1)) * dt;
  out.envelope.source = "physical ringdown envelope";
  for (std::size_t start = skip * window; start + window <= trace.samples.size(); start += window) {
    double m = 0.0;
    for (std::size_t i = start; i < start + window; ++i) m = std::max(m, std::fabs(trace.samples[i]));
    out.envelope.samples.push_back(m);
  }
  RingdownOptions opt;
  opt.allow_growth = true;
  out.fit = fit_ringdown(out.envelope, params.omega0 / (2.0 * kPi), opt);
  out.q = out.fit.q;
  return out;
}

LinearityScan qeff_linearity_scan(const PhysicalModelParams& base, double force_per_watt,
                                  std::span<const double> powers, const RingdownProtocol& protocol) {
  const PhotothermalParams equiv = photothermal_equivalent(base, force_per_watt);
  std::vector<double> inv;
  for (double p : powers) {
    PhysicalModelParams params = base;
    params.photothermal_amplitude = force_per_watt * p;
    const double q_est = effective_q(equiv, p).q_eff;
    inv.push_back(1.0 / measure_physical_q(params, q_est, protocol).q);
  }
  return fit_inverse_q_line({powers.begin(), powers.end()}, std::move(inv));
}

}  // namespace optomech
