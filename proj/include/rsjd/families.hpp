#pragma once

// Registered parametric model families and the pieces they are assembled from.

#include "rsjd/model.hpp"
#include "rsjd/schema.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rsjd {

/// Scalar function of the regime index.
///   number                  constant
///   {"values": [v0, v1..]}  table (regimes past the end are an error)
///   {"affine": [a, b]}      a + b k
///   {"rational": [a,b,c,d]} (a + b k) / (c + d k)
class RegimeFunction {
 public:
  RegimeFunction() = default;
  static RegimeFunction constant(double c);
  static RegimeFunction values(std::vector<double> v);
  static RegimeFunction affine(double a, double b);
  static RegimeFunction rational(double a, double b, double c, double d);
  static RegimeFunction parse(const schema::json& v, const std::string& path);

  double operator()(Regime k) const;
  /// sqrt of this function (for parameters given as squares); negative values are a ModelError.
  RegimeFunction square_root() const;
  /// Last regime with a defined value, if the table is finite.
  std::optional<Regime> last_regime() const;

 private:
  enum class Kind { constant, values, affine, rational } kind_ = Kind::constant;
  std::vector<double> c_{0.0};
  bool root_ = false;
};

/// Scalar function of the continuous state used as a switching rate.
///   number                                        constant
///   {"constant": c}
///   {"tanh": {"base", "amplitude", "scale"}}      base + amplitude tanh(scale x_0)
///   {"rational": {"numerator", "quadratic"}}      numerator / (1 + quadratic |x|^2)
class RateFunction {
 public:
  RateFunction() = default;
  static RateFunction constant(double c);
  static RateFunction tanh(double base, double amplitude, double scale);
  static RateFunction rational(double numerator, double quadratic);
  static RateFunction parse(const schema::json& v, const std::string& path);

  double operator()(const Point& x) const;
  double supremum() const;
  double lipschitz() const;
  bool is_constant() const { return kind_ == Kind::constant; }

 private:
  enum class Kind { constant, tanh, rational } kind_ = Kind::constant;
  double a_ = 0.0, b_ = 0.0, c_ = 0.0;
};

/// Banded rate matrix whose entries depend on the displacement l - k, with
/// optional per-row overrides.
///   {"kappa": 1, "entries": {"+1": rate, "-1": rate}, "rows": {"0": {...}}, "max_regime": M}
struct BandedRates {
  int kappa = 1;
  std::map<int, RateFunction> entries;
  std::map<Regime, std::map<int, RateFunction>> rows;
  std::optional<Regime> max_regime;

  static BandedRates parse(const schema::json& v, const std::string& path);
  RateMatrix matrix() const;
  const std::map<int, RateFunction>& row(Regime k) const;
  /// Bound on q_k(x) over x.
  double row_supremum(Regime k) const;
  /// Bound on sum_l |q_kl(x) - q_kl(y)| / |x - y|.
  double row_lipschitz(Regime k) const;
};

/// {"law": "laplace", "mass": 1, "scale": 1, "mark_dim": d}, "normal", "uniform",
/// "atoms", "symmetric_power" or "none".
JumpMeasure parse_jump_measure(const schema::json& v, int dimension, const std::string& path);

/// Coupled one-dimensional OU family: dX = alpha_k X dt + sigma_k dB + beta_k dN,
/// banded rates between neighbouring regimes.
struct CoupledOuParams {
  RegimeFunction alpha;
  RegimeFunction sigma;
  RegimeFunction beta;
  JumpMeasure jumps = JumpMeasure::laplace(1.0, 1.0);
  BandedRates rates;
  std::optional<double> growth_bound;
  std::optional<double> holder_exponent = 1.0;
};

ModelSpec make_coupled_ou(const CoupledOuParams& p);

/// Reads a "coupled-ou" model section without building the model.
CoupledOuParams parse_coupled_ou(const schema::json& model, const std::string& path = "model");

/// The worked instance alpha_k = -(k+2), sigma_k^2 = beta_k^2 = 1/(k+1) with unit
/// nearest-neighbour rates, truncated at max_regime.
CoupledOuParams ou_example_instance(Regime max_regime);

/// Multi-dimensional affine family: per regime dX = (A_k X + a_k) dt + S_k dB + B_k dN.
struct AffineRegimeParams {
  Matrix drift_matrix;
  Point drift_offset;
  Matrix diffusion;
  Matrix jump_matrix;
};

struct AffineParams {
  int dimension = 1;
  std::vector<AffineRegimeParams> regimes;
  JumpMeasure jumps;
  BandedRates rates;
  bool switching = false;
  std::optional<double> growth_bound;
  std::optional<double> holder_exponent = 1.0;
};

ModelSpec make_affine(const AffineParams& p);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct ParamDoc {
  std::string key;
  std::string schema;
  std::string description;
};

struct ModelFamily {
  std::string name;
  std::string summary;
  std::vector<ParamDoc> params;
  /// Builds a model from the whole "model" section; `path` prefixes error paths.
  std::function<ModelSpec(const schema::json& model, const std::string& path)> build;
};

/// Adds or replaces a family.
void register_family(ModelFamily family);
/// Families whose name contains `filter` (all for an empty filter), sorted by name.
std::vector<ModelFamily> list_models(std::string_view filter = "");
/// Builds from {"family": name, ...}.
ModelSpec build_model(const schema::json& model, const std::string& path = "model");

}  // namespace rsjd
