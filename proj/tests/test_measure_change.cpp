#include "rsjd/measure_change.hpp"
#include "rsjd/stats.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsjd;
using namespace rsjd::testing;

TEST_CASE("auxiliary generator rows") {
  const auto a = build_qhat(1, 3);
  CHECK(a.targets(0) == std::vector<Regime>{1, 2});
  CHECK(a.targets(1) == std::vector<Regime>{0, 2});
  CHECK(a.targets(3) == std::vector<Regime>{2, 4});
  REQUIRE(a.rows.size() == 4);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    double sum = 0.0;
    for (double v : a.rows[k]) sum += v;
    CHECK(sum == doctest::Approx(0.0).scale(1.0));
    CHECK(a.rows[k][k] == -2.0);
  }
  const auto b = build_qhat(2);
  CHECK(b.targets(0) == std::vector<Regime>{1, 2, 3, 4});
  CHECK(b.targets(1) == std::vector<Regime>{0, 2, 3, 4});
  CHECK(b.targets(5) == std::vector<Regime>{3, 4, 6, 7});
  CHECK(b.rate(5, 5) == -4.0);
  CHECK(b.rate(5, 8) == 0.0);
  CHECK_THROWS(build_qhat(0));
}

TEST_CASE("auxiliary chain holds for Exp(2 kappa)") {
  const auto m = two_state(1.0);
  const auto aux = build_qhat(1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.05;
  std::vector<double> holds;
  for (std::uint64_t i = 0; holds.size() < 3000; ++i) {
    AuxiliaryOptions o;
    o.path_index = i;
    // a zero-rate model would stop at the first switch, so use one that allows 0 <-> 1
    const auto w = simulate_auxiliary(m, aux, make_point({0.0}), 0, cfg, o);
    if (!w.epochs.empty()) holds.push_back(w.epochs.front());
  }
  // first epochs conditioned on falling before T = 1: compare with the truncated law via a transform
  std::vector<double> u;
  for (double h : holds) u.push_back(-std::log(1.0 - (1.0 - std::exp(-2.0 * h)) / (1.0 - std::exp(-2.0))));
  CHECK(kolmogorov_pvalue(ks_statistic_exponential(u, 1.0), u.size()) > 0.01);
}

TEST_CASE("weight without switching rates") {
  const auto m = scalar_model(-1, 1, 0.5, JumpMeasure::laplace(1.0));
  const auto aux = build_qhat(1);
  SimConfig cfg;
  cfg.horizon = 0.5;
  cfg.dt = 0.01;
  std::size_t survived = 0, annihilated = 0;
  for (std::uint64_t i = 0; i < 400; ++i) {
    AuxiliaryOptions o;
    o.path_index = i;
    const auto w = simulate_auxiliary(m, aux, make_point({0.0}), 0, cfg, o);
    if (w.switches == 0) {
      ++survived;
      CHECK(w.weight == doctest::Approx(std::exp(2.0 * cfg.horizon)));
    } else {
      ++annihilated;
      CHECK(w.annihilated);
      CHECK(w.weight == 0.0);
      REQUIRE(w.switches == 1);
    }
  }
  CHECK(survived > 0);
  CHECK(annihilated > 0);
}

TEST_CASE("recomputed weight matches the running weight") {
  const auto m = two_state(1.0);
  const auto aux = build_qhat(1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.01;
  int checked = 0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    AuxiliaryOptions o;
    o.path_index = i;
    o.record = true;
    const auto w = simulate_auxiliary(m, aux, make_point({0.2}), 0, cfg, o);
    CHECK(rn_weight(m, aux, w.path, cfg.horizon) == doctest::Approx(w.weight).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("changing the chain stream leaves V's drivers alone") {
  const auto m = scalar_model(-1, 1, 0.5, JumpMeasure::laplace(1.0), constant_rates(1.0, 1));
  const auto aux = build_qhat(1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.01;
  // with regime-independent coefficients psi only moves the grid, so V stays close
  for (std::uint64_t i = 0; i < 5; ++i) {
    AuxiliaryOptions a, b;
    a.path_index = b.path_index = i;
    b.chain_salt = 9;
    const auto wa = simulate_auxiliary(m, aux, make_point({0.3}), 0, cfg, a);
    const auto wb = simulate_auxiliary(m, aux, make_point({0.3}), 0, cfg, b);
    if (wa.annihilated || wb.annihilated) continue;
    CHECK(std::abs(wa.terminal(0) - wb.terminal(0)) < 0.02);
  }
}

TEST_CASE("weighted and direct expectations agree") {
  const auto m = two_state(1.0);
  const auto aux = build_qhat(1);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 0.02;
  cfg.paths = 8000;
  cfg.seed = 2;
  const auto f = test_functions::regime_indicator(0);
  const auto w = weighted_expectation(m, aux, f, make_point({0.5}), 0, cfg);
  cfg.seed = 3;
  const auto d = direct_expectation(m, f, make_point({0.5}), 0, cfg);
  CHECK(std::abs(w.weight.mean - 1.0) < 3.0 * w.weight.std_error);
  CHECK(std::abs(w.estimate.mean - d.mean) < 3.0 * std::hypot(w.estimate.std_error, d.std_error));
  CHECK(w.effective_sample_size > 0.0);
  CHECK(w.effective_sample_size <= cfg.paths);
  CHECK_FALSE(w.degenerate);
}

TEST_CASE("models wider than the auxiliary band are refused") {
  const auto m = scalar_model(-1, 1, 0, JumpMeasure::none(), constant_rates(1.0, 5, 2));
  SimConfig cfg;
  CHECK_THROWS_AS(simulate_auxiliary(m, build_qhat(1), make_point({0.0}), 0, cfg), UnsupportedModel);
  CHECK_NOTHROW(simulate_auxiliary(m, build_qhat(2), make_point({0.0}), 0, cfg));
}
