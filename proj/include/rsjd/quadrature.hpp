#pragma once

#include <vector>

namespace rsjd {

/// Nodes and weights of a Gauss rule. For the probability-weighted rules the
/// weights sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre on [-1, 1] (weights sum to 2).
const QuadratureRule& gauss_legendre(int n);

/// Gauss-Laguerre for the weight e^{-x} on [0, inf) (weights sum to 1).
const QuadratureRule& gauss_laguerre(int n);

/// Gauss-Hermite for the standard normal density (weights sum to 1).
const QuadratureRule& gauss_hermite_probabilist(int n);

}  // namespace rsjd
