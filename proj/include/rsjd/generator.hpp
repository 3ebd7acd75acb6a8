#pragma once

#include "rsjd/model.hpp"
#include "rsjd/simulate.hpp"
#include "rsjd/test_functions.hpp"

#include <vector>

namespace rsjd {

/// Decomposition of Af(x, k) = local + jump + switching.
struct GeneratorValue {
  double local = 0.0;      // <b, grad f> + tr(a hess f)/2
  double jump = 0.0;       // int [f(x + c) - f(x)] Pi(du)
  double switching = 0.0;  // sum_l q_kl(x) [f(x, l) - f(x, k)]
  double total = 0.0;
  double jump_std_error = 0.0;
  bool jump_quadrature = false;
  bool flagged = false;  // mark-integration budget too small
};

struct GeneratorOptions {
  IntegrationBudget budget{};
  /// Use central differences even when analytic derivatives exist.
  bool finite_difference = false;
  /// Finite-difference step; 0 selects max(1e-5, 1e-5 |x_i|) per coordinate.
  double fd_step = 0.0;
};

Point fd_gradient(const TestFunction& f, const Point& x, Regime k, double step = 0.0);
Matrix fd_hessian(const TestFunction& f, const Point& x, Regime k, double step = 0.0);

/// Throws UnsupportedModel for a sigma-finite jump measure or a non-smooth f.
/// `rng` is only used when the jump integral falls back to Monte Carlo.
GeneratorValue apply_generator(const ModelSpec& model, const TestFunction& f, const Point& x, Regime k,
                               const GeneratorOptions& options = {}, RandomStream* rng = nullptr);

struct DynkinResult {
  double residual = 0.0;  // E f(X_t) - f(x0) - E int_0^t Af ds
  double std_error = 0.0;
  double terminal_mean = 0.0;
  double integral_mean = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // exploded or ceiling paths
};

/// Pathwise Dynkin residual; the time integral is a left-point sum over the
/// recorded points of each simulated path. config.horizon is the time t.
DynkinResult dynkin_residual(const ModelSpec& model, const TestFunction& f, const Point& x0, Regime k0,
                             const SimConfig& config, const GeneratorOptions& options = {});

// ---------------------------------------------------------------------------
// Jump-count series for Gaussian regimes
// ---------------------------------------------------------------------------

struct Box {
  Point lo;
  Point hi;
  bool contains(const Point& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

struct GaussianKernel {
  Point mean;
  Matrix covariance;
};

/// Law at time t of dX = (A X + a) dt + S dB started at x.
GaussianKernel gaussian_kernel(const AffineRegime& regime, const Point& x, double t);

/// P(N(mean, cov) in box); supported for d = 1 or a diagonal covariance.
double box_probability(const GaussianKernel& kernel, const Box& box);

struct SeriesTerm {
  int jumps = 0;              // m - 1
  double weight = 0.0;        // e^{-t Pi} (t Pi)^{m-1} / (m-1)!
  double conditional = 0.0;   // P(X_t in A | m-1 jumps)
  double conditional_se = 0.0;
  double value = 0.0;         // weight * conditional
};

struct SeriesKernel {
  Regime regime = 0;
  double t = 0.0;
  int terms_count = 0;
  std::vector<SeriesTerm> terms;
  double remainder = 0.0;  // P(Poisson(t Pi) >= n)
  double estimate = 0.0;
  double std_error = 0.0;
};

struct SeriesOptions {
  int terms = 6;
  std::size_t samples = 20000;  // Monte Carlo draws per term with jumps
  std::uint64_t seed = 1;
};

SeriesKernel transition_series(const ModelSpec& model, Regime k, double t, const Point& x0, const Box& box,
                               const SeriesOptions& options = {});

struct KernelEstimate {
  double probability = 0.0;
  double std_error = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// P(X_t in A) for the regime-frozen dynamics by direct Euler-Maruyama simulation.
KernelEstimate direct_kernel_probability(const ModelSpec& model, Regime k, const Point& x0, const Box& box,
                                         const SimConfig& config);

}  // namespace rsjd
