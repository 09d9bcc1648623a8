#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "optomech/errors.hpp"
#include "optomech/integrate.hpp"
#include "oracles.hpp"

using namespace optomech;

namespace {

OscillatorParams subcritical_params() {
  OscillatorParams p;
  p.q0 = 10.0;
  p.gamma3 = -2.0;
  p.gamma5 = 1.0;
  p.f_m = 1e-4;
  return p;
}

SweepSchedule hold_schedule(double p_final) {
  return SweepSchedule({{0.0, 0.0}, {5000.0, 1.2}, {6000.0, 1.2}, {10000.0, p_final}, {15000.0, p_final}});
}

Rhs harmonic(double omega) {
  return [omega](const State& s) { return Derivative{s.v, -omega * omega * s.x, 0.0}; };
}

}  // namespace

TEST_CASE("rk4 follows the exact harmonic solution with fourth-order error") {
  const double omega = 1.7;
  double err_coarse = 0.0;
  double err_fine = 0.0;
  for (double* err : {&err_coarse, &err_fine}) {
    const double dt = err == &err_coarse ? 0.02 : 0.01;
    const TimeTrace tr = integrate(harmonic(omega), State{0.0, 1.0, 0.0, 0.0}, 20.0, dt);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
      *err = std::max(*err, std::fabs(tr.samples[i] - std::cos(omega * tr.time_at(i))));
    }
  }
  CHECK(err_fine < 5e-8);
  CHECK(err_coarse / err_fine == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("undamped energy is conserved to 1e-8 over 100 cycles") {
  const double dt = 2.0 * oracle::kPi / 1000.0;
  const Integration run =
      integrate_with_state(harmonic(1.0), State{0.0, 1.0, 0.0, 0.0}, 100.0 * 2.0 * oracle::kPi, dt);
  const double e = 0.5 * (run.final_state.x * run.final_state.x + run.final_state.v * run.final_state.v);
  CHECK(std::fabs(e - 0.5) / 0.5 < 1e-8);
}

TEST_CASE("samples sit on the t0 + i dt grid, decimated on request") {
  IntegrationOptions opt;
  opt.decimation = 4;
  const TimeTrace tr = integrate(harmonic(1.0), State{2.0, 1.0, 0.0, 0.0}, 1.0, 0.01, opt);
  CHECK(tr.t0 == 2.0);
  CHECK(tr.dt == doctest::Approx(0.04));
  CHECK(tr.samples.size() == 26);
  CHECK(tr.samples.back() == doctest::Approx(std::cos(1.0)).epsilon(1e-9));
}

TEST_CASE("divergence guard raises with the time of escape") {
  const Rhs grow = [](const State& s) { return Derivative{s.v, s.x, 0.0}; };
  IntegrationOptions opt;
  opt.divergence_limit = 100.0;
  try {
    integrate(grow, State{0.0, 1.0, 1.0, 0.0}, 100.0, 0.01, opt);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.time() == doctest::Approx(std::log(100.0)).epsilon(0.01));
  }
}

TEST_CASE("step-size and argument checks") {
  CHECK_THROWS_AS(check_step(0.2, 1.0), ConfigError);
  CHECK_NOTHROW(check_step(default_step(1.0), 1.0));
  CHECK_THROWS_AS(integrate(harmonic(1.0), State{}, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(integrate(harmonic(1.0), State{}, -1.0, 0.01), ConfigError);
  CHECK_THROWS_AS(SweepSchedule({{0.0, 0.0}}), ConfigError);
  CHECK_THROWS_AS(SweepSchedule({{0.0, 0.0}, {0.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(SweepSchedule({{0.0, 0.0}, {1.0, -1.0}}), ConfigError);
}

TEST_CASE("schedule interpolates linearly and holds outside its span") {
  const SweepSchedule s({{10.0, 0.2}, {20.0, 1.2}, {30.0, 1.2}});
  CHECK(s.p_at(0.0) == 0.2);
  CHECK(s.p_at(15.0) == doctest::Approx(0.7));
  CHECK(s.p_at(25.0) == 1.2);
  CHECK(s.p_at(99.0) == 1.2);
  const SweepSchedule ud = SweepSchedule::up_down(1.2, 0.51);
  CHECK(ud.breakpoints().size() == 5);
  CHECK(ud.p_at(ud.end()) == 0.51);
}

TEST_CASE("seeded initial conditions are reproducible and bounded") {
  const auto a = random_initial_condition(42, 1e-3);
  const auto b = random_initial_condition(42, 1e-3);
  const auto c = random_initial_condition(43, 1e-3);
  CHECK(a == b);
  CHECK(a != c);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto [x, v] = random_initial_condition(seed, 1e-3);
    CHECK(std::fabs(x) <= 1e-3);
    CHECK(std::fabs(v) <= 1e-3);
  }
}

TEST_CASE("sweeps are bit-for-bit deterministic") {
  const SweepSchedule sched({{0.0, 0.0}, {500.0, 1.2}});
  const SweepRecord a = run_sweep(subcritical_params(), sched, 5, default_step(1.0));
  const SweepRecord b = run_sweep(subcritical_params(), sched, 5, default_step(1.0));
  CHECK(a.trace.samples == b.trace.samples);
  CHECK(a.envelope.samples == b.envelope.samples);
  CHECK(a.p_of_t.samples == b.p_of_t.samples);
}

TEST_CASE("halving dt moves the final envelope by less than 0.1%") {
  const double dt = default_step(1.0);
  const SweepRecord coarse = run_sweep(subcritical_params(), hold_schedule(0.51), 1, dt);
  const SweepRecord fine = run_sweep(subcritical_params(), hold_schedule(0.51), 1, dt / 2.0);
  const double a = coarse.envelope.samples.back();
  const double b = fine.envelope.samples.back();
  CHECK(a > 1.0);
  CHECK(std::fabs(a - b) / b < 1e-3);
}

TEST_CASE("sub-threshold sweeps never grow") {
  const SweepSchedule sched({{0.0, 0.0}, {2000.0, 0.45}, {4000.0, 0.45}, {6000.0, 0.1}});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SweepRecord r = run_sweep(subcritical_params(), sched, seed, default_step(1.0));
    const auto& env = r.envelope.samples;
    const auto head = env.begin() + static_cast<std::ptrdiff_t>(env.size() / 10);
    CHECK(env.back() <= *std::max_element(env.begin(), head));
  }
}

TEST_CASE("polynomial ring-down decays at the linear rate below threshold") {
  OscillatorParams p;
  p.q0 = 50.0;
  const TimeTrace tr = run_ringdown(p, DampingMode::quintic, 0.0, 1e-3, 400.0, default_step(1.0));
  // x ~ A0 exp(-t / (2 q0)) cos t for a lightly damped linear oscillator
  const double expect = 1e-3 * std::exp(-400.0 / 100.0);
  double peak = 0.0;
  const std::size_t tail = tr.samples.size() - 110;
  for (std::size_t i = tail; i < tr.samples.size(); ++i) peak = std::max(peak, std::fabs(tr.samples[i]));
  CHECK(peak == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("trace validation") {
  TimeTrace t;
  CHECK_THROWS_AS(t.validate(), InputError);
  t.samples = {1.0, std::nan("")};
  CHECK_THROWS_AS(t.validate(), InputError);
  t.samples = {1.0, 2.0};
  t.dt = 0.0;
  CHECK_THROWS_AS(t.validate(), InputError);
}
