#pragma once

#include "rsjd/rng.hpp"
#include "rsjd/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rsjd {

// ---------------------------------------------------------------------------
// Jump measure
// ---------------------------------------------------------------------------

enum class MarkLaw {
  none,             // Pi = 0
  laplace,          // density (1/2b) e^{-|z|/b} per coordinate
  normal,           // N(mean, sd^2) per coordinate
  uniform,          // U(low, high) per coordinate
  atoms,            // finitely many mark values with probabilities
  symmetric_power,  // intensity * |z|^{-1-index} on lower <= |z| <= upper (1-d)
};

/// Budget for estimating integrals against the jump measure.
struct IntegrationBudget {
  std::size_t samples = 4096;  // Monte Carlo budget
  bool prefer_quadrature = true;
  int quadrature_nodes = 64;
  std::size_t minimum_samples = 32;  // below this the estimate is flagged
};

struct MarkIntegral {
  double value = 0.0;
  double std_error = 0.0;
  bool quadrature = false;
  bool flagged = false;  // budget too small; std_error is inflated
};

/// Characteristic measure Pi of the Poisson random measure together with its
/// mark sampler and integrator. Marks live in R^m.
class JumpMeasure {
 public:
  JumpMeasure() = default;

  static JumpMeasure none();
  static JumpMeasure laplace(double total_mass, double scale = 1.0, int mark_dim = 1);
  static JumpMeasure normal(double total_mass, double mean, double sd, int mark_dim = 1);
  static JumpMeasure uniform(double total_mass, double low, double high, int mark_dim = 1);
  static JumpMeasure atoms(double total_mass, std::vector<Mark> values, std::vector<double> weights);
  /// sigma-finite when lower == 0; small jumps |z| < 1 are the compensated set U0.
  static JumpMeasure symmetric_power(double intensity, double index, double upper, double lower = 0.0);

  MarkLaw law() const { return law_; }
  int mark_dim() const { return mark_dim_; }
  bool finite() const;
  /// Pi(U); infinite for the untruncated symmetric power law.
  double total_mass() const;
  /// True when small marks |u| < 1 form a compensated set U0 of positive mass.
  bool has_compensated_part() const { return law_ == MarkLaw::symmetric_power && lower_ < 1.0; }

  /// Finite measure obtained by dropping marks with |u| < level.
  JumpMeasure truncated(double level) const;
  /// Restriction to marks with lo <= |u| < hi (symmetric power law only).
  JumpMeasure restricted(double lo, double hi) const;

  /// Draw u ~ Pi(.) / Pi(U). Requires a finite measure.
  Mark sample(RandomStream& rng) const;

  bool has_quadrature() const;
  /// Estimates the integral of g against Pi (not normalized).
  MarkIntegral integrate(const std::function<double(const Mark&)>& g, const IntegrationBudget& budget,
                         RandomStream* rng) const;

  double scale() const { return scale_; }

 private:
  MarkLaw law_ = MarkLaw::none;
  int mark_dim_ = 1;
  double mass_ = 0.0;
  double scale_ = 1.0;  // laplace scale
  double mean_ = 0.0;
  double sd_ = 1.0;
  double low_ = 0.0;
  double high_ = 1.0;
  std::vector<Mark> atom_values_;
  std::vector<double> atom_weights_;  // probabilities, sum to one
  double intensity_ = 0.0;
  double index_ = 1.0;
  double lower_ = 0.0;
  double upper_ = 1.0;
};

// ---------------------------------------------------------------------------
// Switching rates
// ---------------------------------------------------------------------------

/// State-dependent banded rate matrix q_kl(x). The rate callback is only asked
/// for l != k, l >= 0 and |l - k| <= band (and l <= max_regime when set).
struct RateMatrix {
  int band = 1;
  std::function<double(const Point&, Regime from, Regime to)> rate;
  std::optional<Regime> max_regime;

  static RateMatrix zero();
  bool is_zero() const { return !rate; }
};

struct RateEntry {
  Regime target = 0;
  double rate = 0.0;
};

/// One row of the rate matrix: nonzero off-diagonal rates and their sum q_k(x).
struct RateRow {
  std::vector<RateEntry> entries;
  double total = 0.0;
};

/// Interval [lo, hi) of the switching partition assigned to target `target`.
struct SwitchInterval {
  Regime target = 0;
  double lo = 0.0;
  double hi = 0.0;
};

struct SwitchPartition {
  std::vector<SwitchInterval> intervals;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

using DriftFn = std::function<Point(const Point&, Regime)>;
using DiffusionFn = std::function<Matrix(const Point&, Regime)>;
using JumpFn = std::function<Point(const Point&, Regime, const Mark&)>;

/// Regime whose frozen diffusion is linear: dX = (A X + a) dt + S dB.
struct AffineRegime {
  Matrix drift_matrix;
  Point drift_offset;
  Matrix diffusion;
};

/// Full description of the hybrid process (X, Lambda). Immutable once built;
/// every evaluation is a pure function of its arguments.
struct ModelSpec {
  std::string family = "custom";
  int dimension = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  JumpFn jump;
  JumpMeasure jumps;
  RateMatrix rates;
  std::optional<double> growth_bound;     // H
  std::optional<double> holder_exponent;  // delta in (0, 1]
  /// Set for regimes whose jump-free dynamics are Gaussian (OU family).
  std::function<std::optional<AffineRegime>(Regime)> affine_regime;

  /// Checks structural consistency; throws ModelError.
  void check() const;

  Point eval_drift(const Point& x, Regime k) const;
  Matrix eval_diffusion(const Point& x, Regime k) const;
  Point eval_jump(const Point& x, Regime k, const Mark& u) const;
};

/// Off-diagonal rates out of regime k at x. Throws ModelError on a negative or
/// non-finite rate, naming (x, k, l).
RateRow q_row(const ModelSpec& model, const Point& x, Regime k);

/// q_k(x) without materializing the row.
double total_rate(const ModelSpec& model, const Point& x, Regime k);

/// Concatenated intervals of lengths q_kl(x), in ascending target order.
SwitchPartition partition(const ModelSpec& model, const Point& x, Regime k);

/// Regime displacement l - k when r lies in the interval of target l, else 0.
int h_eval(const ModelSpec& model, const Point& x, Regime k, double r);
int h_eval(const SwitchPartition& part, Regime k, double r);

// ---------------------------------------------------------------------------
// Assumption probing
// ---------------------------------------------------------------------------

enum class CheckStatus { pass, fail, unknown };
std::string to_string(CheckStatus s);

struct ProbePoint {
  Point x;
  Regime k = 0;
};

struct AssumptionCheck {
  std::string name;
  CheckStatus status = CheckStatus::unknown;
  double worst_ratio = 0.0;
  std::size_t probes = 0;
  std::string note;
  // Witness for a failure: a point, or a pair of points for the Lipschitz-type bounds.
  std::optional<ProbePoint> witness;
  std::optional<Point> witness_partner;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  std::size_t probe_count = 0;
  bool all_passed() const;
  const AssumptionCheck& get(const std::string& name) const;
};

struct ProbeOptions {
  double tolerance = 1e-9;
  std::vector<double> pair_distances{1.0, 1e-2, 1e-4, 1e-6};
  IntegrationBudget budget{};
  std::uint64_t seed = 7;
};

/// Probes the growth, Lipschitz, rate-bound, Hölder, jump L1-Lipschitz,
/// rate Lipschitz, nonnegativity and band conditions at the given points.
AssumptionReport validate_assumptions(const ModelSpec& model, const std::vector<ProbePoint>& probes,
                                      const ProbeOptions& options = {});

/// Frobenius norm squared of a matrix, |sigma|^2.
inline double frobenius_sq(const Matrix& m) { return m.squaredNorm(); }

}  // namespace rsjd
