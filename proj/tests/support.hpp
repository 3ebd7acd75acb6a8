#pragma once

#include "rsjd/families.hpp"
#include "rsjd/model.hpp"

#include <cmath>
#include <functional>

namespace rsjd::testing {

/// dX = a X dt + s dB + beta dN with regime-independent coefficients and a custom rate callback.
inline ModelSpec scalar_model(double a, double s, double beta, JumpMeasure pi, RateMatrix rates = RateMatrix::zero()) {
  ModelSpec m;
  m.dimension = 1;
  m.drift = [a](const Point& x, Regime) { return Point(a * x); };
  m.diffusion = [s](const Point&, Regime) {
    Matrix out(1, 1);
    out(0, 0) = s;
    return out;
  };
  m.jump = [beta](const Point&, Regime, const Mark& u) { return Point(beta * u); };
  m.jumps = std::move(pi);
  m.rates = std::move(rates);
  m.growth_bound = 100.0;
  m.holder_exponent = 1.0;
  return m;
}

inline RateMatrix constant_rates(double rate, Regime max_regime, int band = 1) {
  RateMatrix q;
  q.band = band;
  q.max_regime = max_regime;
  q.rate = [rate](const Point&, Regime, Regime) { return rate; };
  return q;
}

/// Single-regime OU with the given coefficients, built through the registered family.
inline ModelSpec single_ou(double alpha, double sigma, double beta, JumpMeasure pi) {
  CoupledOuParams p;
  p.alpha = RegimeFunction::constant(alpha);
  p.sigma = RegimeFunction::constant(sigma);
  p.beta = RegimeFunction::constant(beta);
  p.jumps = std::move(pi);
  p.rates.max_regime = 0;
  p.growth_bound = 100.0;
  return make_coupled_ou(p);
}

/// Two regimes with q01 = q10 = rate.
inline ModelSpec two_state(double rate, double alpha = -1.0, double sigma = 1.0) {
  CoupledOuParams p;
  p.alpha = RegimeFunction::constant(alpha);
  p.sigma = RegimeFunction::constant(sigma);
  p.beta = RegimeFunction::constant(0.5);
  p.jumps = JumpMeasure::laplace(1.0, 1.0);
  p.rates.kappa = 1;
  p.rates.entries = {{1, RateFunction::constant(rate)}, {-1, RateFunction::constant(rate)}};
  p.rates.max_regime = 1;
  p.growth_bound = 100.0;
  return make_coupled_ou(p);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace rsjd::testing
