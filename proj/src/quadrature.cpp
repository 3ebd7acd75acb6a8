#include "rsjd/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace rsjd {
namespace {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix, weights are
// mu0 times the squared first eigenvector components.
QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const Eigen::Index n = diag.size();
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    jacobi(i, i) = diag(i);
    if (i + 1 < n) {
      jacobi(i, i + 1) = offdiag(i);
      jacobi(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

enum class Family { legendre, laguerre, hermite };

const QuadratureRule& cached(Family family, int n) {
  static std::mutex mutex;
  static std::map<std::pair<Family, int>, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(family, n);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("quadrature: need at least one node");
  Eigen::VectorXd diag(n), off(std::max(n - 1, 1));
  double mu0 = 1.0;
  for (int i = 0; i < n; ++i) {
    switch (family) {
      case Family::legendre:
        diag(i) = 0.0;
        if (i + 1 < n) off(i) = (i + 1.0) / std::sqrt(4.0 * (i + 1.0) * (i + 1.0) - 1.0);
        mu0 = 2.0;
        break;
      case Family::laguerre:
        diag(i) = 2.0 * i + 1.0;
        if (i + 1 < n) off(i) = i + 1.0;
        break;
      case Family::hermite:
        diag(i) = 0.0;
        if (i + 1 < n) off(i) = std::sqrt(i + 1.0);
        break;
    }
  }
  return cache.emplace(key, golub_welsch(diag, off.head(std::max(n - 1, 0)), mu0)).first->second;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) { return cached(Family::legendre, n); }
const QuadratureRule& gauss_laguerre(int n) { return cached(Family::laguerre, n); }
const QuadratureRule& gauss_hermite_probabilist(int n) { return cached(Family::hermite, n); }

}  // namespace rsjd
