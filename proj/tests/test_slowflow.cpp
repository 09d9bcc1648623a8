#include <doctest.h>

#include <cmath>

#include "optomech/errors.hpp"
#include "optomech/experiments.hpp"
#include "optomech/random.hpp"
#include "optomech/slowflow.hpp"
#include "oracles.hpp"

using namespace optomech;

TEST_CASE("fold of the quintic bracket") {
  const FoldPoint f = fold_point(-2.0, 1.0);
  CHECK(f.p == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.amplitude == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(averaged_bracket(-2.0, 1.0, f.p, f.amplitude) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(fold_point(1.0, 1.0), DomainError);
  CHECK_THROWS_AS(fold_point(-1.0, 0.0), DomainError);
}

TEST_CASE("steady amplitudes agree with the quadratic-formula oracle") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double g3 = -4.0 + 3.5 * rng.uniform();
    const double g5 = 0.25 + 3.75 * rng.uniform();
    const double p = 1.4 * rng.uniform();
    const auto roots = steady_amplitudes(g3, g5, p);
    const auto expect = oracle::slow_flow_roots(g3, g5, p);
    REQUIRE(roots.size() == expect.size() + 1);
    CHECK(roots[0].amplitude == 0.0);
    CHECK(roots[0].stable == (p < 1.0));
    for (std::size_t k = 0; k < expect.size(); ++k) {
      CHECK(roots[k + 1].amplitude == doctest::Approx(expect[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("every returned amplitude is a root to 1e-12") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double g3 = -4.0 + 8.0 * rng.uniform();
    const double g5 = 4.0 * rng.uniform();
    const double p = 2.0 * rng.uniform();
    for (const BranchPoint& b : steady_amplitudes(g3, g5, p)) {
      if (b.amplitude == 0.0) continue;
      CHECK(std::fabs(averaged_bracket(g3, g5, p, b.amplitude)) < 1e-12);
    }
  }
}

TEST_CASE("stability alternates across the bistable window") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double g3 = -4.0 + 3.5 * rng.uniform();
    const double g5 = 0.25 + 3.75 * rng.uniform();
    const FoldPoint f = fold_point(g3, g5);
    const double p = f.p + (1.0 - f.p) * (0.01 + 0.98 * rng.uniform());
    const auto roots = steady_amplitudes(g3, g5, p);
    REQUIRE(roots.size() == 3);
    CHECK(roots[0].stable);
    CHECK_FALSE(roots[1].stable);
    CHECK(roots[2].stable);
  }
}

TEST_CASE("hysteresis width equals g3^2/(8 g5)") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const double g3 = -4.0 + 3.9 * rng.uniform();
    const double g5 = 0.1 + 4.0 * rng.uniform();
    const BifurcationSummary s = classify(g3, g5);
    REQUIRE(s.kind == BifurcationKind::subcritical);
    CHECK(s.hopf_p - *s.fold_p == doctest::Approx(g3 * g3 / (8.0 * g5)).epsilon(1e-14));
  }
}

TEST_CASE("classification of the remaining sign patterns") {
  CHECK(classify(1.0, 0.0).kind == BifurcationKind::supercritical);
  CHECK(classify(0.0, 1.0).kind == BifurcationKind::supercritical);
  CHECK(classify(-1.0, 0.0).kind == BifurcationKind::degenerate);
  CHECK_FALSE(classify(1.0, 0.0).fold_p.has_value());
}

TEST_CASE("slow-flow rate sign matches the stability flags") {
  const double g3 = -2.0, g5 = 1.0, p = 0.8;
  const auto roots = steady_amplitudes(g3, g5, p);
  REQUIRE(roots.size() == 3);
  const double eps = 1e-3;
  // Unstable cycle repels, stable one attracts.
  CHECK(slow_flow_rate(g3, g5, p, roots[1].amplitude + eps, 0.1) > 0.0);
  CHECK(slow_flow_rate(g3, g5, p, roots[1].amplitude - eps, 0.1) < 0.0);
  CHECK(slow_flow_rate(g3, g5, p, roots[2].amplitude + eps, 0.1) < 0.0);
  CHECK(slow_flow_rate(g3, g5, p, roots[2].amplitude - eps, 0.1) > 0.0);
}

TEST_CASE("branch diagram rows") {
  const auto rows = branch_diagram(-2.0, 1.0, 0.0, 1.3, 131);
  bool found = false;
  for (const auto& r : rows) {
    if (r.fold) {
      CHECK(r.p == doctest::Approx(0.5));
      CHECK(r.amplitude == doctest::Approx(1.41421356).epsilon(1e-8));
      found = true;
    }
  }
  CHECK(found);
  CHECK(branch_diagram(-2.0, 1.0, 1.0, 0.0, 10).empty());
  CHECK(branch_diagram(-2.0, 1.0, 0.0, 1.0, 0).empty());

  // van der Pol: one supercritical branch A = 2 sqrt(p - 1) from p = 1
  for (const auto& r : branch_diagram(1.0, 0.0, 0.0, 2.0, 21)) {
    if (r.amplitude == 0.0) {
      CHECK(r.stable == (r.p < 1.0));
    } else {
      CHECK(r.p > 1.0);
      CHECK(r.stable);
      CHECK(r.amplitude == doctest::Approx(2.0 * std::sqrt(r.p - 1.0)));
    }
  }
}

TEST_CASE("long integration settles onto the averaged amplitude") {
  Rng rng(21);
  std::vector<SettleRequest> requests;
  std::vector<double> expect;
  for (int i = 0; i < 6; ++i) {
    SettleRequest r;
    r.params.q0 = 10.0;
    r.params.gamma3 = -4.0 + 3.5 * rng.uniform();
    r.params.gamma5 = 0.25 + 3.75 * rng.uniform();
    const FoldPoint f = fold_point(r.params.gamma3, r.params.gamma5);
    r.p = f.p + (1.0 - f.p) * (0.1 + 0.8 * rng.uniform());
    const auto roots = oracle::slow_flow_roots(r.params.gamma3, r.params.gamma5, r.p);
    r.x0 = 1.1 * roots.back();
    requests.push_back(r);
    expect.push_back(roots.back());
  }
  const auto results = settle_batch(requests, 3000.0);
  for (std::size_t i = 0; i < results.size(); ++i) {
    CHECK_FALSE(results[i].diverged);
    CHECK(results[i].amplitude == doctest::Approx(expect[i]).epsilon(0.03));
  }
}
