#pragma once

#include "rsjd/families.hpp"
#include "rsjd/generator.hpp"
#include "rsjd/model.hpp"
#include "rsjd/simulate.hpp"
#include "rsjd/test_functions.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsjd {

// ---------------------------------------------------------------------------
// Drift certificates
// ---------------------------------------------------------------------------

struct DriftSample {
  Point x;
  Regime k = 0;
  double v = 0.0;         // V(x, k)
  double av = 0.0;        // AV(x, k)
  double jump_se = 0.0;
  bool unknown = false;   // generator could not be evaluated within budget
};

struct DriftCertificate {
  std::string lyapunov;
  double alpha = 0.0;
  double gamma = 0.0;
  double tolerance = 0.0;
  std::string region;
  std::vector<DriftSample> samples;
  std::vector<std::size_t> violations;  // indices into samples
  std::size_t unknown = 0;
  bool passed() const { return violations.empty() && unknown == 0; }
  /// "pass at N samples" or "fail (m violations)".
  std::string status() const;
};

/// x uniform on [-radius, radius]^d, k uniform on {0..max_regime}; deterministic in seed.
std::vector<ProbePoint> sample_region(int dimension, double radius, Regime max_regime, std::size_t count,
                                      std::uint64_t seed);

/// Evaluates (V, AV) at the given points.
std::vector<DriftSample> drift_samples(const ModelSpec& model, const TestFunction& v,
                                       const std::vector<ProbePoint>& points, const GeneratorOptions& options = {},
                                       std::uint64_t seed = 1);

/// Violation when AV + alpha V - gamma > tolerance + 3 jump_se.
DriftCertificate check_drift(const ModelSpec& model, const TestFunction& v, const std::vector<ProbePoint>& points,
                             double alpha, double gamma, double tolerance = 1e-9,
                             const GeneratorOptions& options = {}, std::uint64_t seed = 1);

struct DriftFit {
  bool certified = false;
  double alpha = 0.0;
  double gamma = 0.0;
  std::vector<double> alpha_grid;
  std::vector<double> gamma_grid;  // gamma(alpha) = max over samples of (AV + alpha V)
};

struct DriftFitOptions {
  double gamma_cap = 1e6;
  double alpha_min = 1e-3;
  double alpha_max = 1e3;
  std::size_t grid_points = 601;
};

/// Largest grid alpha with gamma(alpha) <= cap. Needs at least ten samples.
DriftFit fit_drift(const std::vector<DriftSample>& samples, const DriftFitOptions& options = {});

// ---------------------------------------------------------------------------
// Linearized conditions at infinity
// ---------------------------------------------------------------------------

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearizedRegime {
  Matrix b;                   // drift ~ b x
  std::vector<Matrix> sigma;  // column j of the diffusion ~ sigma_j x
  double c_hat = 0.0;         // jump tail constant
};

struct LinearizedSpec {
  std::vector<LinearizedRegime> regimes;  // 0..M
  double p = 1.0;
  double alpha = 0.1;
  RegimeFunction g;  // weights g_i > 0
  double radius = 100.0;
};

double mu_i(const LinearizedSpec& spec, Regime i);

struct TailConstant {
  double value = 0.0;
  double std_error = 0.0;
  bool flagged = false;
};

/// sup over directions on |x| = radius of int (|x + c|^p / |x|^p - 1) Pi(du).
TailConstant jump_tail_constant(const ModelSpec& model, Regime i, double p, double radius,
                                const IntegrationBudget& budget = {}, std::size_t directions = 16,
                                std::uint64_t seed = 1);

/// Linearization of a Gaussian (affine) model: b = A_i, sigma_j = 0 for additive noise.
LinearizedSpec linearize_affine(const ModelSpec& model, Regime max_regime, double p, double alpha, RegimeFunction g,
                                double radius, const IntegrationBudget& budget = {});

struct LinearizedResult {
  bool passed = false;
  double worst_margin = 0.0;
  std::optional<ProbePoint> witness;
  bool radius_consistent = true;  // signs at r and 2r agree
  std::vector<double> regime_margins;  // worst margin per regime at radius r
  std::vector<double> regime_margins_2r;
};

/// Checks sum_j q_ij(x) g_j + p (alpha + mu_i) g_i <= 0 (q_ii = -q_i) for every
/// regime of the spec at points on |x| = r and |x| = 2r.
LinearizedResult check_linearized(const LinearizedSpec& spec, const ModelSpec& model, std::size_t directions = 8,
                                  std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// The coupled OU example
// ---------------------------------------------------------------------------

/// int |u|^2 Pi(du) by quadrature.
double jump_second_moment(const JumpMeasure& pi);

/// K2 = max_k [(k+1) sigma_k^2 + J (k+1) beta_k^2] over k <= max_regime.
double ou_example_k2(const CoupledOuParams& p, double jump_constant, Regime max_regime);

struct ConditionResult {
  bool passed = true;
  double worst = -std::numeric_limits<double>::infinity();  // largest lhs - rhs
  std::optional<ProbePoint> witness;
};

struct OuConditions {
  ConditionResult a, b, c;
  bool passed() const { return a.passed && b.passed && c.passed; }
};

OuConditions ou_example_conditions(const CoupledOuParams& params, double k1, double k2, double jump_constant,
                                   const std::vector<Point>& probes, Regime max_regime);

// ---------------------------------------------------------------------------
// Empirical convergence
// ---------------------------------------------------------------------------

struct BinSpec {
  double lo = -4.0;
  double hi = 4.0;
  int count = 8;          // per coordinate, plus two overflow bins
  Regime max_regime = 0;  // regimes above share one bin
  std::size_t total(int dimension) const;
  std::size_t index(const Point& x, Regime k) const;
};

struct ConvergenceOptions {
  std::vector<double> checkpoints;
  BinSpec bins;
  double reference_horizon = 2000.0;
  double reference_burn_in = 50.0;
  double reference_spacing = 0.1;
  bool certified = false;  // false: experiment on a non-certified model, flagged
  /// Checkpoints whose distance is below this are left out of the fit; defaults to
  /// three times the sampling noise floor of the ensemble histogram.
  std::optional<double> fit_floor;
};

struct ConvergenceSeries {
  Point x0;
  Regime k0 = 0;
  std::vector<double> distance;      // binned TV to the reference, per checkpoint
  std::vector<double> mean_x_sq;
  std::vector<double> mean_lambda;
  LinearFit fit;                     // log distance against t
  std::size_t fit_points = 0;
  std::size_t excluded = 0;
};

struct ErgodicityReport {
  std::vector<double> checkpoints;
  std::vector<ConvergenceSeries> series;
  std::size_t reference_samples = 0;
  std::size_t undersampled_bins = 0;  // reference bins with fewer than 5 samples
  std::size_t bins = 0;
  bool certified = false;
  double noise_floor = 0.0;  // expected proxy between n draws from the reference law and the law itself
  double fit_floor = 0.0;
  /// Largest proxy between the final-checkpoint ensembles of two different starts.
  double start_spread = 0.0;
  std::string proxy = "binned total variation";
};

ErgodicityReport empirical_convergence(const ModelSpec& model, const std::vector<ProbePoint>& starts,
                                       const SimConfig& config, const ConvergenceOptions& options);

}  // namespace rsjd
