#include "rsjd/coupling.hpp"
#include "rsjd/families.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsjd;
using namespace rsjd::testing;

namespace {

ModelSpec tanh_model(double amplitude) {
  CoupledOuParams p;
  p.alpha = RegimeFunction::values({-1.0, -2.0});
  p.sigma = RegimeFunction::constant(1.0);
  p.beta = RegimeFunction::constant(0.5);
  p.jumps = JumpMeasure::laplace(1.0);
  p.rates.kappa = 1;
  p.rates.entries = {{1, RateFunction::tanh(1.0, amplitude, 1.0)}, {-1, RateFunction::tanh(1.0, -amplitude, 1.0)}};
  p.rates.max_regime = 1;
  return make_coupled_ou(p);
}

}  // namespace

TEST_CASE("basic coupling splits each rate into joint and excess parts") {
  const auto m = tanh_model(0.8);
  const Point x = make_point({0.5}), z = make_point({-0.2});
  const auto same = coupled_switch_rates(m, x, 0, z, 0);
  REQUIRE(same.entries.size() == 1);
  const double qx = 1.0 + 0.8 * std::tanh(0.5), qz = 1.0 + 0.8 * std::tanh(-0.2);
  CHECK(same.entries[0].joint == doctest::Approx(std::min(qx, qz)));
  CHECK(same.entries[0].excess1 == doctest::Approx(qx - qz));
  CHECK(same.entries[0].excess2 == 0.0);
  // marginals are preserved
  CHECK(same.entries[0].excess1 + same.entries[0].joint == doctest::Approx(qx));
  CHECK(same.entries[0].excess2 + same.entries[0].joint == doctest::Approx(qz));

  const auto equal = coupled_switch_rates(m, x, 1, x, 1);
  CHECK(equal.total_excess1 == 0.0);
  CHECK(equal.total_excess2 == 0.0);
}

TEST_CASE("identical starts stay together") {
  const auto m = tanh_model(1.0);
  SimConfig cfg;
  cfg.horizon = 3.0;
  cfg.dt = 0.01;
  cfg.seed = 4;
  const auto p = simulate_coupled(m, make_point({0.7}), make_point({0.7}), 0, cfg);
  CHECK_FALSE(p.zeta);
  for (const auto& s : p.states) {
    REQUIRE(s.x(0) == s.z(0));
    REQUIRE(s.k == s.l);
  }
}

TEST_CASE("state-independent rates never decouple") {
  const auto m = two_state(1.0);
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.dt = 0.01;
  cfg.paths = 200;
  const auto p = decoupling_probability(m, make_point({1.0}), make_point({-1.0}), 0, cfg);
  CHECK(p.mean == 0.0);
}

TEST_CASE("zeta is the first time the regimes differ") {
  const auto m = tanh_model(1.0);
  SimConfig cfg;
  cfg.horizon = 5.0;
  cfg.dt = 0.01;
  int found = 0;
  for (std::uint64_t i = 0; i < 40 && found < 3; ++i) {
    CoupledOptions opt;
    opt.path_index = i;
    opt.checkpoints = {1.0, 5.0};
    const auto p = simulate_coupled(m, make_point({2.0}), make_point({-2.0}), 0, cfg, opt);
    if (!p.zeta) continue;
    ++found;
    for (const auto& s : p.states) {
      if (s.t < *p.zeta) REQUIRE(s.k == s.l);
    }
    bool split = false;
    for (const auto& s : p.states)
      if (s.t == *p.zeta && s.k != s.l) split = true;
    CHECK(split);
    // the stopped distance is frozen after zeta
    if (*p.zeta < 1.0) CHECK(p.stopped_distance[0] == p.stopped_distance[1]);
  }
  CHECK(found > 0);
}

TEST_CASE("each coupled coordinate has the law of the process") {
  const auto m = tanh_model(1.0);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.01;
  cfg.paths = 3000;
  cfg.seed = 31;
  const auto rep = contraction_estimate(m, make_point({1.0}), make_point({0.5}), 0, cfg, {1.0});
  cfg.seed = 32;
  const auto direct = simulate_batch(m, make_point({1.0}), 0, cfg);
  const auto& pt = rep.points.back();
  const double se = std::hypot(pt.x_mean.std_error, direct.std_error[0].back());
  CHECK(std::abs(pt.x_mean.mean - direct.mean[0].back()) < 3.0 * se);
  cfg.seed = 33;
  const auto direct_z = simulate_batch(m, make_point({0.5}), 0, cfg);
  const double se_z = std::hypot(pt.z_mean.std_error, direct_z.std_error[0].back());
  CHECK(std::abs(pt.z_mean.mean - direct_z.mean[0].back()) < 3.0 * se_z);
}

TEST_CASE("contraction report is an envelope") {
  const auto m = tanh_model(0.2);
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.dt = 0.01;
  cfg.paths = 500;
  cfg.seed = 5;
  const std::vector<double> cps{0.5, 1.0, 1.5, 2.0};
  const auto rep = contraction_estimate(m, make_point({0.0}), make_point({0.05}), 0, cfg, cps);
  REQUIRE(rep.points.size() == cps.size());
  CHECK(rep.gap == doctest::Approx(0.05));
  CHECK(rep.bound_holds);
  for (const auto& p : rep.points) CHECK(p.distance.mean <= rep.gap * std::exp(rep.fitted_c * p.t) * (1 + 1e-12));
  // OU contraction: distances shrink
  CHECK(rep.fitted_c < 0.0);
  CHECK(rep.used == cfg.paths);
  CHECK_THROWS(contraction_estimate(m, make_point({0.0}), make_point({0.05}), 0, cfg, {}));
}
