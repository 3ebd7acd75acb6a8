#include "rsjd/simulate.hpp"
#include "rsjd/stats.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>

using namespace rsjd;
using namespace rsjd::testing;

TEST_CASE("inter-switch times are exponential with the constant rate") {
  const auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), constant_rates(2.0, 1));
  SimConfig cfg;
  cfg.horizon = 1500.0;
  cfg.dt = 0.05;
  cfg.seed = 3;
  const auto path = simulate_hybrid(m, make_point({0.0}), 0, cfg);
  REQUIRE(path.status == PathStatus::completed);
  std::vector<double> gaps;
  double last = 0.0;
  for (const auto& s : path.switches) {
    gaps.push_back(s.t - last);
    last = s.t;
  }
  REQUIRE(gaps.size() > 2500);
  const double d = ks_statistic_exponential(gaps, 2.0);
  CHECK(kolmogorov_pvalue(d, gaps.size()) > 0.01);
}

TEST_CASE("thinning clock gives the same switch law") {
  const auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), constant_rates(2.0, 1));
  SimConfig cfg;
  cfg.horizon = 1500.0;
  cfg.dt = 0.05;
  cfg.seed = 4;
  cfg.clock = ClockScheme::thinning;
  const auto path = simulate_hybrid(m, make_point({0.0}), 0, cfg);
  std::vector<double> gaps;
  double last = 0.0;
  for (const auto& s : path.switches) {
    gaps.push_back(s.t - last);
    last = s.t;
  }
  REQUIRE(gaps.size() > 2500);
  CHECK(kolmogorov_pvalue(ks_statistic_exponential(gaps, 2.0), gaps.size()) > 0.01);
}

TEST_CASE("switch targets follow the rate proportions") {
  RateMatrix q;
  q.band = 2;
  q.rate = [](const Point&, Regime, Regime l) { return l == 1 ? 1.0 : 3.0; };
  const auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), q);
  RandomStream rng(8, 0, Substream::switch_target);
  std::map<Regime, double> counts;
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[sample_switch_target(m, make_point({0.0}), 0, rng)] += 1;
  REQUIRE(counts.size() == 2);
  const double e1 = n * 0.25, e2 = n * 0.75;
  const double chi = (counts[1] - e1) * (counts[1] - e1) / e1 + (counts[2] - e2) * (counts[2] - e2) / e2;
  CHECK(chi_square_pvalue(chi, 1) > 0.01);
}

TEST_CASE("zero rates never switch") {
  const auto m = scalar_model(-1, 1, 0.5, JumpMeasure::laplace(1.0));
  SimConfig cfg;
  cfg.horizon = 20.0;
  cfg.dt = 0.01;
  const auto path = simulate_hybrid(m, make_point({1.0}), 3, cfg);
  CHECK(path.switches.empty());
  for (const auto& p : path.points) REQUIRE(p.k == 3);
  CHECK_FALSE(path.jumps.empty());
}

TEST_CASE("deterministic flow matches the Euler product") {
  const auto m = scalar_model(-1, 0, 0, JumpMeasure::none());
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 1e-3;
  const auto path = simulate_hybrid(m, make_point({1.0}), 0, cfg);
  const double xt = path.points.back().x(0);
  CHECK(path.points.back().t == doctest::Approx(1.0));
  CHECK(xt == doctest::Approx(std::pow(1.0 - 1e-3, 1000)).epsilon(1e-9));
  CHECK(std::abs(xt - std::exp(-1.0)) < 1e-3);
}

TEST_CASE("two-state occupancy against the matrix exponential") {
  const auto m = two_state(1.0);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.02;
  cfg.paths = 20000;
  cfg.seed = 12;
  const auto stats = simulate_batch(m, make_point({0.0}), 0, cfg);
  const auto li = stats.functional_index("lambda");
  // P(lambda_1 = 0) = 1 - E lambda_1
  const double p0 = 1.0 - stats.mean[li].back();
  const double oracle = 0.5 * (1.0 + std::exp(-2.0));
  CHECK(std::abs(p0 - oracle) < 3.0 * stats.std_error[li].back());
}

TEST_CASE("paths reproduce and the worker count does not matter") {
  const auto m = two_state(1.5);
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.dt = 0.01;
  cfg.seed = 77;
  PathOptions opt;
  opt.path_index = 5;
  const auto a = simulate_hybrid(m, make_point({0.4}), 0, cfg, opt);
  const auto b = simulate_hybrid(m, make_point({0.4}), 0, cfg, opt);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    REQUIRE(a.points[i].t == b.points[i].t);
    REQUIRE(a.points[i].x(0) == b.points[i].x(0));
    REQUIRE(a.points[i].k == b.points[i].k);
  }
  opt.path_index = 6;
  const auto c = simulate_hybrid(m, make_point({0.4}), 0, cfg, opt);
  CHECK(c.points.back().x(0) != a.points.back().x(0));

  cfg.paths = 300;
  BatchOptions bo;
  bo.checkpoints = {0.5, 1.0, 2.0};
  cfg.workers = 1;
  const auto s1 = simulate_batch(m, make_point({0.4}), 0, cfg, bo);
  cfg.workers = 3;
  const auto s3 = simulate_batch(m, make_point({0.4}), 0, cfg, bo);
  CHECK(s1.mean == s3.mean);
  CHECK(s1.variance == s3.variance);
  CHECK(s1.sup_x_sq.mean == s3.sup_x_sq.mean);
}

TEST_CASE("events are right-continuous in the recorded path") {
  const auto m = two_state(2.0);
  SimConfig cfg;
  cfg.horizon = 5.0;
  cfg.dt = 0.01;
  cfg.seed = 9;
  const auto path = simulate_hybrid(m, make_point({0.0}), 0, cfg);
  REQUIRE_FALSE(path.switches.empty());
  REQUIRE_FALSE(path.jumps.empty());
  for (const auto& s : path.switches) {
    auto it = std::find_if(path.points.begin(), path.points.end(),
                           [&](const PathPoint& p) { return p.t == s.t && p.k == s.to; });
    REQUIRE(it != path.points.end());
    CHECK(it->tag == EventTag::switch_epoch);
    CHECK(it->x(0) == s.x(0));
    REQUIRE(it != path.points.begin());
    CHECK(std::prev(it)->k == s.from);
  }
  for (std::size_t i = 1; i < path.points.size(); ++i) REQUIRE(path.points[i].t >= path.points[i - 1].t);
}

TEST_CASE("a jump moves the state by the recorded displacement") {
  // no drift and no noise, so the pre-jump state is the previous recorded point
  const auto m = scalar_model(0, 0, 0.5, JumpMeasure::laplace(2.0));
  SimConfig cfg;
  cfg.horizon = 5.0;
  cfg.dt = 0.01;
  const auto path = simulate_hybrid(m, make_point({1.0}), 0, cfg);
  REQUIRE(path.jumps.size() > 3);
  for (const auto& j : path.jumps) {
    auto it = std::find_if(path.points.begin(), path.points.end(),
                           [&](const PathPoint& p) { return p.t == j.t && p.tag == EventTag::jump; });
    REQUIRE(it != path.points.end());
    REQUIRE(it != path.points.begin());
    CHECK(it->x(0) == doctest::Approx(std::prev(it)->x(0) + j.displacement(0)).epsilon(1e-14));
    CHECK(j.displacement(0) == doctest::Approx(0.5 * j.mark(0)));
  }
}

TEST_CASE("explosion is recorded and its time grows with the radius") {
  auto m = scalar_model(0, 0, 0, JumpMeasure::none());
  m.drift = [](const Point& x, Regime) { return Point(x.cwiseProduct(x)); };
  SimConfig cfg;
  cfg.horizon = 3.0;
  cfg.dt = 1e-3;
  double previous = 0.0;
  for (double radius : {10.0, 1e3, 1e6}) {
    cfg.explosion_radius = radius;
    const auto path = simulate_hybrid(m, make_point({1.0}), 0, cfg);
    CHECK(path.status == PathStatus::exploded);
    CHECK_FALSE(path.diagnostic.empty());
    const double t = path.points.back().t;
    CHECK(t >= previous);
    CHECK(t < 1.1);
    previous = t;
  }
}

TEST_CASE("a regime ceiling stops the path") {
  const auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), constant_rates(5.0, 100));
  SimConfig cfg;
  cfg.horizon = 50.0;
  cfg.dt = 0.01;
  cfg.regime_ceiling = 2;
  const auto path = simulate_hybrid(m, make_point({0.0}), 0, cfg);
  CHECK(path.status == PathStatus::ceiling);
}
