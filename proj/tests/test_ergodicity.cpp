#include "rsjd/ergodicity.hpp"
#include "rsjd/families.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsjd;
using namespace rsjd::testing;

namespace {

// Largest eigenvalue of a symmetric matrix by power iteration on a positive shift.
double power_iteration_max(const Matrix& s) {
  const double shift = s.cwiseAbs().sum() + 1.0;
  const Matrix m = s + shift * Matrix::Identity(s.rows(), s.cols());
  Point v = Point::Ones(s.rows());
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    const Point w = m * v;
    lambda = v.dot(w) / v.dot(v);
    v = w / w.norm();
  }
  return lambda - shift;
}

}  // namespace

TEST_CASE("mu_i is the top eigenvalue plus the tail constant") {
  LinearizedRegime r;
  r.b = Matrix(3, 3);
  r.b << -1.0, 2.0, 0.0, 0.5, -3.0, 1.0, 0.0, -1.0, -0.5;
  Matrix s1(3, 3);
  s1 << 0.2, 0.0, 0.1, 0.0, 0.3, 0.0, 0.0, 0.1, 0.0;
  r.sigma = {s1};
  r.c_hat = 0.25;
  LinearizedSpec spec;
  spec.regimes = {r};
  const Matrix sym = 0.5 * (r.b + r.b.transpose()) + s1 * s1.transpose();
  CHECK(mu_i(spec, 0) == doctest::Approx(power_iteration_max(sym) + 0.25).epsilon(1e-9));
  CHECK_THROWS_AS(mu_i(spec, 1), TruncationError);
}

TEST_CASE("fit_drift finds the largest admissible alpha") {
  std::vector<DriftSample> samples;
  for (int i = 0; i <= 20; ++i) {
    DriftSample s;
    s.x = make_point({double(i)});
    s.v = 5.0 * i;
    s.av = -2.0 * s.v + 1.0;
    samples.push_back(s);
  }
  DriftFitOptions opt;
  opt.gamma_cap = 1.5;
  const auto fit = fit_drift(samples, opt);
  CHECK(fit.certified);
  CHECK(fit.alpha <= 2.005);
  CHECK(fit.alpha > 2.0 / 1.03);
  CHECK(fit.gamma <= 1.5);
  REQUIRE(fit.alpha_grid.size() == opt.grid_points);
  samples.resize(5);
  CHECK_THROWS(fit_drift(samples, opt));
}

TEST_CASE("drift certificate on the OU example and its transient variant") {
  const auto params = ou_example_instance(30);
  const auto m = make_coupled_ou(params);
  const double j = jump_second_moment(params.jumps);
  CHECK(j == doctest::Approx(2.0).epsilon(1e-12));
  const double k2 = ou_example_k2(params, j, 30);
  CHECK(k2 == doctest::Approx(3.0).epsilon(1e-12));
  const auto points = sample_region(1, 50.0, 30, 200, 3);
  for (const auto& p : points) {
    REQUIRE(std::abs(p.x(0)) <= 50.0);
    REQUIRE(p.k >= 0);
    REQUIRE(p.k <= 30);
  }
  const auto v = test_functions::lyapunov_ou();
  const auto cert = check_drift(m, v, points, 3.0, k2);
  CHECK(cert.passed());
  CHECK(cert.status() == "pass at 200 samples");

  const auto transient = single_ou(1.0, 1.0, 1.0, JumpMeasure::laplace(1.0));
  const auto bad = check_drift(transient, v, sample_region(1, 50.0, 0, 200, 3), 3.0, k2);
  CHECK_FALSE(bad.passed());
  CHECK_FALSE(bad.violations.empty());

  auto negative = v;
  negative.value = [](const Point& x, Regime) { return -x.squaredNorm(); };
  CHECK_THROWS(check_drift(m, negative, points, 3.0, k2));
}

TEST_CASE("worked OU conditions") {
  const auto params = ou_example_instance(30);
  std::vector<Point> probes;
  for (double x = -50; x <= 50; x += 2.5) probes.push_back(make_point({x}));
  const auto ok = ou_example_conditions(params, 3.0, 3.0, 2.0, probes, 30);
  CHECK(ok.passed());
  const auto a_fails = ou_example_conditions(params, 3.5, 3.0, 2.0, probes, 30);
  CHECK_FALSE(a_fails.a.passed);
  CHECK(a_fails.a.worst == doctest::Approx(0.5));
  const auto b_fails = ou_example_conditions(params, 3.0, 2.9, 2.0, probes, 30);
  CHECK_FALSE(b_fails.b.passed);
  CHECK(b_fails.c.passed);
}

TEST_CASE("jump tail constant against the Laplace closed form") {
  // E|r + W| = r + s e^{-r/s} for W Laplace(0, s), so the constant at p = 1 is (s/r) e^{-r/s}
  for (double beta : {0.5, 1.0}) {
    for (double r : {1.0, 4.0}) {
      const auto m = single_ou(-1.0, 1.0, beta, JumpMeasure::laplace(1.0));
      const auto c = jump_tail_constant(m, 0, 1.0, r);
      CHECK(c.value == doctest::Approx(beta / r * std::exp(-r / beta)).epsilon(0.02));
    }
  }
  // with atoms the integral is a finite sum: marks +-2, x = 1, p = 1/2
  const auto atoms = JumpMeasure::atoms(3.0, {make_point({2.0}), make_point({-2.0})}, {0.5, 0.5});
  const auto m = single_ou(-1.0, 1.0, 1.0, atoms);
  const double oracle = 1.5 * (std::sqrt(3.0) - 1.0) + 1.5 * (1.0 - 1.0);
  CHECK(jump_tail_constant(m, 0, 0.5, 1.0).value == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("linearized criterion") {
  const auto m = make_coupled_ou(ou_example_instance(12));
  const auto spec = linearize_affine(m, 10, 1.0, 0.1, RegimeFunction::affine(1.0, 1.0), 100.0);
  REQUIRE(spec.regimes.size() == 11);
  CHECK(spec.regimes[3].b(0, 0) == -5.0);
  CHECK(mu_i(spec, 3) == doctest::Approx(-5.0).epsilon(1e-3));
  const auto res = check_linearized(spec, m);
  CHECK(res.passed);
  CHECK(res.radius_consistent);
  CHECK(res.worst_margin < 0.0);

  const auto unstable = single_ou(1.0, 1.0, 1.0, JumpMeasure::laplace(1.0));
  const auto uspec = linearize_affine(unstable, 0, 1.0, 0.1, RegimeFunction::constant(1.0), 100.0);
  const auto bad = check_linearized(uspec, unstable);
  CHECK_FALSE(bad.passed);
  REQUIRE(bad.witness);

  CHECK_THROWS_AS(check_linearized(linearize_affine(m, 10, 1.0, 0.1, RegimeFunction::values({1, 1, 1}), 100.0), m),
                  TruncationError);
}

TEST_CASE("bins route overflow and high regimes") {
  BinSpec b;
  b.lo = -1;
  b.hi = 1;
  b.count = 4;
  b.max_regime = 1;
  CHECK(b.total(1) == 6 * 3);
  CHECK(b.index(make_point({-5.0}), 0) == 0);
  CHECK(b.index(make_point({5.0}), 0) == 5);
  CHECK(b.index(make_point({0.1}), 0) == 3);
  CHECK(b.index(make_point({0.1}), 7) == b.index(make_point({0.1}), 2));
}

TEST_CASE("convergence report is reproducible and validates its input") {
  const auto m = make_coupled_ou(ou_example_instance(2));
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.dt = 0.02;
  cfg.paths = 300;
  cfg.seed = 5;
  ConvergenceOptions opt;
  opt.checkpoints = {0.5, 1.0, 2.0};
  opt.bins = {-2.0, 2.0, 4, 2};
  opt.reference_horizon = 200.0;
  opt.reference_burn_in = 10.0;
  opt.reference_spacing = 0.5;
  const std::vector<ProbePoint> starts{{make_point({3.0}), 0}, {make_point({-2.0}), 2}};
  const auto a = empirical_convergence(m, starts, cfg, opt);
  cfg.workers = 2;
  const auto b = empirical_convergence(m, starts, cfg, opt);
  REQUIRE(a.series.size() == 2);
  CHECK(a.series[0].distance == b.series[0].distance);
  CHECK(a.series[1].distance == b.series[1].distance);
  CHECK(a.reference_samples == b.reference_samples);
  CHECK(a.noise_floor > 0.0);
  CHECK(a.series[0].distance.front() > a.series[0].distance.back());

  opt.checkpoints.clear();
  CHECK_THROWS(empirical_convergence(m, starts, cfg, opt));
}
