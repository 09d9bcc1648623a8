#include <doctest.h>

#include <cmath>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/experiments.hpp"
#include "optomech/slowflow.hpp"

using namespace optomech;

namespace {

OscillatorParams subcritical(double f_m = 1e-4) {
  OscillatorParams p;
  p.q0 = 10.0;
  p.gamma3 = -2.0;
  p.gamma5 = 1.0;
  p.f_m = f_m;
  return p;
}

const std::vector<double> kGrid = {0.0, 0.1, 0.2,  0.3, 0.4, 0.45, 0.495, 0.51, 0.52,
                                   0.55, 0.6, 0.7, 0.8, 0.9, 0.95, 1.05,  1.1,  1.2};

std::vector<HysteresisPoint> branch(SweepDirection d, const std::vector<double>& p, const std::vector<double>& a) {
  std::vector<HysteresisPoint> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({d, p[i], a[i], 0.0, true});
  return out;
}

HysteresisOptions no_q() {
  HysteresisOptions o;
  o.measure_q = false;
  return o;
}

}  // namespace

TEST_CASE("jump detection takes the midpoint of the first large ratio") {
  const auto up = branch(SweepDirection::up, {0.0, 0.5, 1.0, 1.5}, {1e-3, 2e-3, 2.0, 2.1});
  const auto down = branch(SweepDirection::down, {1.5, 1.0, 0.5, 0.0}, {2.1, 2.0, 1.5, 1e-3});
  const auto [ju, jd] = detect_jumps(up, down);
  REQUIRE(ju);
  REQUIRE(jd);
  CHECK(*ju == doctest::Approx(0.75));
  CHECK(*jd == doctest::Approx(0.25));
  const auto flat = branch(SweepDirection::up, {0.0, 0.5, 1.0}, {1.0, 1.1, 1.2});
  CHECK_FALSE(detect_jumps(flat, flat).first);
  CHECK_THROWS_AS(detect_jumps(std::vector<HysteresisPoint>(up.begin(), up.begin() + 2), down), InputError);
}

TEST_CASE("loop area integrates the squared-amplitude gap") {
  HysteresisCurve c;
  c.up_branch = branch(SweepDirection::up, {0.0, 1.0, 2.0}, {0.0, 0.0, 2.0});
  c.down_branch = branch(SweepDirection::down, {2.0, 1.0, 0.0}, {2.0, 1.0, 0.0});
  // trapezoid over (0, 1, 0)
  CHECK(loop_area(c) == doctest::Approx(1.0));
  c.down_branch = branch(SweepDirection::down, {2.0, 1.0, 0.0}, {2.0, 0.0, 0.0});
  CHECK(loop_area(c) == 0.0);
}

TEST_CASE("default stepped sweep shows the subcritical loop") {
  const HysteresisCurve c = hysteresis_experiment(subcritical(), kGrid, 1000.0, 1);
  REQUIRE(c.jump_down);
  REQUIRE(c.jump_up);
  CHECK(*c.jump_down > 0.50);
  CHECK(*c.jump_down <= 0.51);
  CHECK(*c.jump_up > *c.jump_down);
  CHECK(loop_area(c) > 0.5);
  CHECK(c.up_branch.size() == kGrid.size());
  CHECK(c.down_branch.size() == kGrid.size());
  CHECK(c.down_branch.front().control == kGrid.back());
  // upper branch follows the averaged stable amplitude
  for (const auto& pt : c.down_branch) {
    if (pt.control < 0.52) continue;
    const auto roots = steady_amplitudes(-2.0, 1.0, pt.control);
    const double a = roots.back().amplitude;
    CHECK(pt.amplitude == doctest::Approx(a).epsilon(0.03));
    // linearised slow flow: Q = 2 q0 / (A² (g3 + g5 A²))
    CHECK(pt.q_eff == doctest::Approx(2.0 * 10.0 / (a * a * (-2.0 + a * a))).epsilon(0.1));
  }
}

TEST_CASE("effective Q grows towards the fold on the lower branch") {
  const HysteresisCurve c = hysteresis_experiment(subcritical(), kGrid, 1000.0, 1);
  // below threshold the probe sees Q0 / (1 - p)
  for (const auto& pt : c.up_branch) {
    if (pt.control > 0.9) break;
    CHECK(pt.q_eff == doctest::Approx(10.0 / (1.0 - pt.control)).epsilon(0.05));
  }
}

TEST_CASE("jump points do not depend on the seed") {
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  const auto curves = hysteresis_experiments(subcritical(), kGrid, 1000.0, seeds, no_q());
  REQUIRE(curves.size() == 4);
  for (const auto& c : curves) {
    REQUIRE(c.jump_up);
    REQUIRE(c.jump_down);
    CHECK(*c.jump_up == *curves[0].jump_up);
    CHECK(*c.jump_down == *curves[0].jump_down);
  }
  CHECK(curves[1].seed == 2);
}

TEST_CASE("supercritical damping gives no hysteresis") {
  OscillatorParams p;
  p.q0 = 10.0;
  p.gamma3 = 1.0;
  p.gamma5 = 0.0;
  p.f_m = 1e-4;
  HysteresisOptions o = no_q();
  o.mode = DampingMode::vdp;
  const HysteresisCurve c = hysteresis_experiment(p, kGrid, 1000.0, 1, o);
  if (c.jump_up && c.jump_down) {
    CHECK(std::fabs(*c.jump_up - *c.jump_down) <= 0.1 + 1e-12);
  } else {
    CHECK(c.jump_up.has_value() == c.jump_down.has_value());
  }
  const HysteresisCurve sub = hysteresis_experiment(subcritical(), kGrid, 1000.0, 1, no_q());
  CHECK(std::fabs(loop_area(c)) < 0.01 * loop_area(sub));
}

TEST_CASE("longer dwells on a finer grid narrow the gap towards g3^2/(8 g5)") {
  std::vector<double> grid;
  for (int i = 0; i <= 70; ++i) grid.push_back(0.02 * i);
  const double width = 0.5;
  HysteresisOptions o = no_q();
  // weak drive: at 1e-4 the forced response ramps through p = 1 without a ratio-5 step
  const HysteresisCurve short_dwell = hysteresis_experiment(subcritical(1e-8), grid, 1000.0, 1, o);
  const HysteresisCurve long_dwell = hysteresis_experiment(subcritical(1e-8), grid, 4000.0, 1, o);
  REQUIRE(short_dwell.jump_up);
  REQUIRE(long_dwell.jump_up);
  const double e_short = std::fabs(*short_dwell.jump_up - *short_dwell.jump_down - width);
  const double e_long = std::fabs(*long_dwell.jump_up - *long_dwell.jump_down - width);
  CHECK(e_long < e_short);
}

TEST_CASE("hysteresis arguments are validated") {
  const std::vector<double> bad_start = {0.1, 0.5, 1.2};
  CHECK_THROWS_AS(hysteresis_experiment(subcritical(), bad_start, 1000.0, 1), ConfigError);
  const std::vector<double> low_top = {0.0, 0.5, 0.9};
  CHECK_THROWS_AS(hysteresis_experiment(subcritical(), low_top, 1000.0, 1), ConfigError);
  const std::vector<double> unsorted = {0.0, 0.6, 0.5, 1.2};
  CHECK_THROWS_AS(hysteresis_experiment(subcritical(), unsorted, 1000.0, 1), ConfigError);
  CHECK_THROWS_AS(hysteresis_experiment(subcritical(), kGrid, 10.0, 1), ConfigError);
}

TEST_CASE("fold scan brackets the averaged fold") {
  const FoldScan s = fold_scan(subcritical(0.0), 0.5, 0.01, 5, 3000.0);
  REQUIRE(std::isfinite(s.estimate));
  CHECK(s.highest_collapse < s.lowest_survivor);
  CHECK(std::fabs(s.estimate - 0.5) <= 0.01);
}

TEST_CASE("sweep read-outs") {
  SweepRecord r;
  r.envelope.dt = r.p_of_t.dt = 1.0;
  r.envelope.samples = {0.0, 0.1, 0.2, 0.8, 1.0, 1.0};
  r.p_of_t.samples = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  r.trace = r.envelope;
  CHECK(*sweep_onset(r, 0.5) == doctest::Approx(0.6));
  CHECK_FALSE(sweep_onset(r, 2.0).has_value());
  CHECK(mean_envelope(r, 3.0, 5.0) == doctest::Approx((0.8 + 1.0 + 1.0) / 3.0));
}

TEST_CASE("inverse-Q line fit") {
  const LinearityScan l = fit_inverse_q_line({1.0, 2.0, 3.0, 4.0}, {0.9, 0.8, 0.7, 0.6});
  CHECK(l.slope == doctest::Approx(-0.1));
  CHECK(l.intercept == doctest::Approx(1.0));
  CHECK(l.residual < 1e-12);
  CHECK(*l.zero_crossing == doctest::Approx(10.0));

  PhotothermalParams pp;
  pp.kappa = 2.0;
  const double pc = critical_power(pp);
  const std::vector<double> powers = {0.2 * pc, 0.4 * pc, 0.6 * pc, 0.8 * pc};
  const LinearityScan f = qeff_linearity_scan(pp, powers);
  CHECK(*f.zero_crossing == doctest::Approx(pc).epsilon(1e-9));
  CHECK(f.intercept == doctest::Approx(1.0 / pp.q0));
}

TEST_CASE("physical ring-down agrees with the closed-form effective Q") {
  PhysicalModelParams p;
  p.q0 = 100.0;
  p.tau = 1.0;
  const PhotothermalParams eq = photothermal_equivalent(p, 1.0);
  const double pc = critical_power(eq);
  REQUIRE(std::isfinite(pc));
  for (double frac : {0.0, 0.5}) {
    PhysicalModelParams run = p;
    run.photothermal_amplitude = frac * pc;
    const double q_formula = effective_q(eq, frac * pc).q_eff;
    const PhysicalRingdown r = measure_physical_q(run, q_formula);
    CHECK(r.q == doctest::Approx(q_formula).epsilon(0.05));
  }
}
