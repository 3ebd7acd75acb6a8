#include "rsjd/families.hpp"
#include "rsjd/model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsjd;
using rsjd::testing::scalar_model;

namespace {

ModelSpec banded(double up, double down, double skip) {
  BandedRates r;
  r.kappa = 2;
  r.entries = {{1, RateFunction::constant(up)}, {-1, RateFunction::constant(down)}, {2, RateFunction::constant(skip)}};
  CoupledOuParams p;
  p.alpha = RegimeFunction::constant(-1);
  p.sigma = RegimeFunction::constant(1);
  p.beta = RegimeFunction::constant(0);
  p.jumps = JumpMeasure::none();
  p.rates = r;
  return make_coupled_ou(p);
}

}  // namespace

TEST_CASE("rate rows skip negative targets and sum the entries") {
  const auto m = banded(1.0, 2.0, 3.0);
  const Point x = make_point({0.3});
  const auto r0 = q_row(m, x, 0);
  REQUIRE(r0.entries.size() == 2);
  CHECK(r0.entries[0].target == 1);
  CHECK(r0.entries[1].target == 2);
  CHECK(r0.total == doctest::Approx(4.0));
  const auto r3 = q_row(m, x, 3);
  CHECK(r3.total == doctest::Approx(6.0));
  CHECK(total_rate(m, x, 3) == doctest::Approx(6.0));
}

TEST_CASE("partition and h") {
  const auto m = banded(1.0, 2.0, 3.0);
  const Point x = make_point({0.0});
  const auto part = partition(m, x, 3);
  REQUIRE(part.intervals.size() == 3);
  CHECK(part.total == doctest::Approx(6.0));
  double lo = 0.0;
  for (const auto& iv : part.intervals) {
    CHECK(iv.lo == doctest::Approx(lo));
    lo = iv.hi;
  }
  CHECK(part.intervals[0].target < part.intervals[1].target);
  // targets 2 (rate 2), 4 (rate 1), 5 (rate 3) in ascending order
  CHECK(h_eval(m, x, 3, 0.5) == -1);
  CHECK(h_eval(m, x, 3, 2.5) == 1);
  CHECK(h_eval(m, x, 3, 5.9) == 2);
  CHECK(h_eval(m, x, 3, 6.0) == 0);
  CHECK(h_eval(m, x, 3, 100.0) == 0);
}

TEST_CASE("negative rates are reported with the offending indices") {
  auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), rsjd::testing::constant_rates(-0.5, 3));
  try {
    (void)q_row(m, make_point({1.0}), 1);
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    const std::string what = e.what();
    CHECK(what.find("1") != std::string::npos);
  }
}

TEST_CASE("jump measure moments") {
  const auto lap = JumpMeasure::laplace(2.0, 0.5);
  IntegrationBudget budget;
  const auto m2 = lap.integrate([](const Mark& u) { return u.squaredNorm(); }, budget, nullptr);
  CHECK(m2.quadrature);
  CHECK(m2.value == doctest::Approx(2.0 * 2 * 0.25).epsilon(1e-10));

  const auto nor = JumpMeasure::normal(1.5, 1.0, 2.0);
  CHECK(nor.integrate([](const Mark& u) { return u(0) * u(0); }, budget, nullptr).value ==
        doctest::Approx(1.5 * 5.0).epsilon(1e-10));

  const auto sp = JumpMeasure::symmetric_power(1.0, 0.5, 4.0);
  CHECK_FALSE(sp.finite());
  CHECK(sp.has_compensated_part());
  const auto cut = sp.truncated(0.1);
  CHECK(cut.finite());
  // 2 int_0.1^4 u^{-1.5} du
  CHECK(cut.total_mass() == doctest::Approx(4.0 * (1.0 / std::sqrt(0.1) - 0.5)).epsilon(1e-10));
}

TEST_CASE("a well-posed OU passes every probe") {
  const auto m = rsjd::testing::two_state(1.0);
  std::vector<ProbePoint> probes;
  for (double x : {-20.0, -1.0, 0.0, 0.5, 7.0})
    for (Regime k : {0, 1}) probes.push_back({make_point({x}), k});
  const auto rep = validate_assumptions(m, probes);
  CHECK(rep.all_passed());
  CHECK(rep.probe_count == probes.size());
}

TEST_CASE("quadratic drift breaks linear growth") {
  auto m = scalar_model(-1, 1, 0, JumpMeasure::none());
  m.drift = [](const Point& x, Regime) { return Point(-x.cwiseProduct(x)); };
  m.growth_bound = 10.0;
  std::vector<ProbePoint> probes{{make_point({1.0}), 0}, {make_point({50.0}), 0}};
  const auto rep = validate_assumptions(m, probes);
  const auto& g = rep.get("linear-growth");
  CHECK(g.status == CheckStatus::fail);
  REQUIRE(g.witness);
  CHECK(g.witness->x(0) == 50.0);
  CHECK(rep.get("lipschitz").status == CheckStatus::fail);
}

TEST_CASE("a sign-switching rate breaks the Hoelder bound") {
  RateMatrix q;
  q.band = 1;
  q.max_regime = 1;
  q.rate = [](const Point& x, Regime, Regime) { return x(0) >= 0.0 ? 1.0 : 0.0; };
  auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), q);
  m.holder_exponent = 0.5;
  std::vector<ProbePoint> probes{{make_point({1e-7}), 0}, {make_point({3.0}), 1}};
  const auto rep = validate_assumptions(m, probes);
  CHECK(rep.get("rate-holder").status == CheckStatus::fail);
  CHECK(rep.get("rate-lipschitz").status == CheckStatus::fail);
  CHECK(rep.get("rate-bound").status == CheckStatus::pass);
}

TEST_CASE("missing constants leave checks unknown") {
  auto m = scalar_model(-1, 1, 0, JumpMeasure::none());
  m.growth_bound.reset();
  const auto rep = validate_assumptions(m, {{make_point({1.0}), 0}});
  CHECK(rep.get("linear-growth").status == CheckStatus::unknown);
  CHECK_FALSE(rep.all_passed());
}
