#include "rsjd/families.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace rsjd {

using schema::json;

// ---------------------------------------------------------------------------
// RegimeFunction
// ---------------------------------------------------------------------------

RegimeFunction RegimeFunction::constant(double c) {
  RegimeFunction f;
  f.kind_ = Kind::constant;
  f.c_ = {c};
  return f;
}

RegimeFunction RegimeFunction::values(std::vector<double> v) {
  if (v.empty()) throw ModelError("regime table must not be empty");
  RegimeFunction f;
  f.kind_ = Kind::values;
  f.c_ = std::move(v);
  return f;
}

RegimeFunction RegimeFunction::affine(double a, double b) {
  RegimeFunction f;
  f.kind_ = Kind::affine;
  f.c_ = {a, b};
  return f;
}

RegimeFunction RegimeFunction::rational(double a, double b, double c, double d) {
  RegimeFunction f;
  f.kind_ = Kind::rational;
  f.c_ = {a, b, c, d};
  return f;
}

RegimeFunction RegimeFunction::square_root() const {
  RegimeFunction f = *this;
  if (root_) throw ModelError("square root applied twice");
  f.root_ = true;
  return f;
}

double RegimeFunction::operator()(Regime k) const {
  if (k < 0) throw ModelError("negative regime " + std::to_string(k));
  double v = 0.0;
  switch (kind_) {
    case Kind::constant:
      v = c_[0];
      break;
    case Kind::values:
      if (static_cast<std::size_t>(k) >= c_.size())
        throw ModelError("regime " + std::to_string(k) + " is past the end of a regime table of size " +
                         std::to_string(c_.size()));
      v = c_[static_cast<std::size_t>(k)];
      break;
    case Kind::affine:
      v = c_[0] + c_[1] * k;
      break;
    case Kind::rational: {
      const double den = c_[2] + c_[3] * k;
      if (den == 0.0) throw ModelError("rational regime function has a zero denominator at k = " + std::to_string(k));
      v = (c_[0] + c_[1] * k) / den;
      break;
    }
  }
  if (root_) {
    if (v < 0.0) throw ModelError("squared parameter is negative at k = " + std::to_string(k));
    v = std::sqrt(v);
  }
  return v;
}

std::optional<Regime> RegimeFunction::last_regime() const {
  if (kind_ == Kind::values) return static_cast<Regime>(c_.size()) - 1;
  return std::nullopt;
}

RegimeFunction RegimeFunction::parse(const json& v, const std::string& path) {
  if (v.is_number()) return constant(schema::number(v, path));
  if (!v.is_object() || v.size() != 1)
    throw ConfigError(path, "expected a number or one of {values, affine, rational}");
  const auto& [key, arg] = *v.items().begin();
  const std::string p = schema::join(path, key);
  const auto xs = schema::numbers(arg, p);
  if (key == "values") {
    if (xs.empty()) throw ConfigError(p, "must not be empty");
    return values(xs);
  }
  if (key == "affine") {
    if (xs.size() != 2) throw ConfigError(p, "expected [a, b]");
    return affine(xs[0], xs[1]);
  }
  if (key == "rational") {
    if (xs.size() != 4) throw ConfigError(p, "expected [a, b, c, d]");
    return rational(xs[0], xs[1], xs[2], xs[3]);
  }
  throw ConfigError(p, "unknown regime function");
}

// ---------------------------------------------------------------------------
// RateFunction
// ---------------------------------------------------------------------------

RateFunction RateFunction::constant(double c) {
  if (!(c >= 0.0)) throw ModelError("constant rate must be nonnegative");
  RateFunction f;
  f.a_ = c;
  return f;
}

RateFunction RateFunction::tanh(double base, double amplitude, double scale) {
  if (!(base >= std::abs(amplitude))) throw ModelError("tanh rate needs base >= |amplitude| to stay nonnegative");
  RateFunction f;
  f.kind_ = Kind::tanh;
  f.a_ = base;
  f.b_ = amplitude;
  f.c_ = scale;
  return f;
}

RateFunction RateFunction::rational(double numerator, double quadratic) {
  if (!(numerator >= 0.0) || !(quadratic >= 0.0)) throw ModelError("rational rate needs numerator, quadratic >= 0");
  RateFunction f;
  f.kind_ = Kind::rational;
  f.a_ = numerator;
  f.b_ = quadratic;
  return f;
}

double RateFunction::operator()(const Point& x) const {
  switch (kind_) {
    case Kind::constant:
      return a_;
    case Kind::tanh:
      return a_ + b_ * std::tanh(c_ * x(0));
    default:
      return a_ / (1.0 + b_ * x.squaredNorm());
  }
}

double RateFunction::supremum() const {
  switch (kind_) {
    case Kind::constant:
      return a_;
    case Kind::tanh:
      return a_ + std::abs(b_);
    default:
      return a_;
  }
}

double RateFunction::lipschitz() const {
  switch (kind_) {
    case Kind::constant:
      return 0.0;
    case Kind::tanh:
      return std::abs(b_ * c_);
    default:
      // max of |d/dr a/(1+q r^2)| is a (3 sqrt 3 / 8) sqrt q
      return a_ * 3.0 * std::sqrt(3.0) / 8.0 * std::sqrt(b_);
  }
}

RateFunction RateFunction::parse(const json& v, const std::string& path) {
  if (v.is_number()) return constant(schema::nonnegative(v, path));
  if (!v.is_object() || v.size() != 1) throw ConfigError(path, "expected a number or one of {constant, tanh, rational}");
  const auto& [key, arg] = *v.items().begin();
  const std::string p = schema::join(path, key);
  try {
    if (key == "constant") return constant(schema::nonnegative(arg, p));
    if (key == "tanh") {
      schema::allow_keys(arg, {"base", "amplitude", "scale"}, p);
      return tanh(schema::number(schema::require(arg, "base", p), schema::join(p, "base")),
                  schema::number(schema::require(arg, "amplitude", p), schema::join(p, "amplitude")),
                  schema::number(schema::require(arg, "scale", p), schema::join(p, "scale")));
    }
    if (key == "rational") {
      schema::allow_keys(arg, {"numerator", "quadratic"}, p);
      return rational(schema::number(schema::require(arg, "numerator", p), schema::join(p, "numerator")),
                      schema::number(schema::require(arg, "quadratic", p), schema::join(p, "quadratic")));
    }
  } catch (const ModelError& e) {
    throw ConfigError(p, e.what());
  }
  throw ConfigError(p, "unknown rate function");
}

// ---------------------------------------------------------------------------
// BandedRates
// ---------------------------------------------------------------------------

namespace {

std::map<int, RateFunction> parse_entries(const json& v, int kappa, const std::string& path) {
  schema::expect_object(v, path);
  std::map<int, RateFunction> out;
  for (const auto& [key, rate] : v.items()) {
    const std::string p = schema::join(path, key);
    int shift = 0;
    try {
      std::size_t used = 0;
      shift = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(p, "entry keys are regime displacements such as \"+1\" or \"-1\"");
    }
    if (shift == 0 || std::abs(shift) > kappa) throw ConfigError(p, "displacement must satisfy 0 < |l-k| <= kappa");
    out[shift] = RateFunction::parse(rate, p);
  }
  return out;
}

}  // namespace

BandedRates BandedRates::parse(const json& v, const std::string& path) {
  schema::allow_keys(v, {"kappa", "entries", "rows", "max_regime"}, path);
  BandedRates r;
  if (const json* k = schema::find(v, "kappa"))
    r.kappa = static_cast<int>(schema::integer_at_least(*k, 1, schema::join(path, "kappa")));
  r.entries = parse_entries(schema::require(v, "entries", path), r.kappa, schema::join(path, "entries"));
  if (const json* rows = schema::find(v, "rows")) {
    const std::string rp = schema::join(path, "rows");
    schema::expect_object(*rows, rp);
    for (const auto& [key, entries] : rows->items()) {
      const std::string p = schema::join(rp, key);
      Regime k = -1;
      try {
        std::size_t used = 0;
        k = std::stoi(key, &used);
        if (used != key.size()) k = -1;
      } catch (const std::exception&) {
      }
      if (k < 0) throw ConfigError(p, "row keys are regime indices");
      r.rows[k] = parse_entries(entries, r.kappa, p);
    }
  }
  if (const json* m = schema::find(v, "max_regime"))
    r.max_regime = static_cast<Regime>(schema::integer_at_least(*m, 0, schema::join(path, "max_regime")));
  return r;
}

const std::map<int, RateFunction>& BandedRates::row(Regime k) const {
  auto it = rows.find(k);
  return it == rows.end() ? entries : it->second;
}

RateMatrix BandedRates::matrix() const {
  bool any = !entries.empty();
  for (const auto& [_, e] : rows) any = any || !e.empty();
  if (!any) return RateMatrix::zero();
  RateMatrix m;
  m.band = kappa;
  m.max_regime = max_regime;
  const BandedRates self = *this;
  m.rate = [self](const Point& x, Regime from, Regime to) {
    const auto& r = self.row(from);
    auto it = r.find(to - from);
    return it == r.end() ? 0.0 : it->second(x);
  };
  return m;
}

double BandedRates::row_supremum(Regime k) const {
  double s = 0.0;
  for (const auto& [shift, f] : row(k)) {
    const Regime l = k + shift;
    if (l < 0 || (max_regime && l > *max_regime)) continue;
    s += f.supremum();
  }
  return s;
}

double BandedRates::row_lipschitz(Regime k) const {
  double s = 0.0;
  for (const auto& [shift, f] : row(k)) {
    const Regime l = k + shift;
    if (l < 0 || (max_regime && l > *max_regime)) continue;
    s += f.lipschitz();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Jump measures
// ---------------------------------------------------------------------------

JumpMeasure parse_jump_measure(const json& v, int dimension, const std::string& path) {
  const std::string law = schema::string(schema::require(v, "law", path), schema::join(path, "law"));
  auto num = [&](const char* key) { return schema::number(schema::require(v, key, path), schema::join(path, key)); };
  auto mark_dim = [&] {
    const json* m = schema::find(v, "mark_dim");
    return m ? static_cast<int>(schema::integer_at_least(*m, 1, schema::join(path, "mark_dim"))) : dimension;
  };
  try {
    if (law == "none") {
      schema::allow_keys(v, {"law"}, path);
      return JumpMeasure::none();
    }
    if (law == "laplace") {
      schema::allow_keys(v, {"law", "mass", "scale", "mark_dim"}, path);
      const json* s = schema::find(v, "scale");
      return JumpMeasure::laplace(num("mass"), s ? schema::positive(*s, schema::join(path, "scale")) : 1.0, mark_dim());
    }
    if (law == "normal") {
      schema::allow_keys(v, {"law", "mass", "mean", "sd", "mark_dim"}, path);
      const json* m = schema::find(v, "mean");
      return JumpMeasure::normal(num("mass"), m ? schema::number(*m, schema::join(path, "mean")) : 0.0, num("sd"),
                                 mark_dim());
    }
    if (law == "uniform") {
      schema::allow_keys(v, {"law", "mass", "low", "high", "mark_dim"}, path);
      return JumpMeasure::uniform(num("mass"), num("low"), num("high"), mark_dim());
    }
    if (law == "atoms") {
      schema::allow_keys(v, {"law", "mass", "values", "weights"}, path);
      const json& vals = schema::require(v, "values", path);
      if (!vals.is_array() || vals.empty()) throw ConfigError(schema::join(path, "values"), "expected a non-empty array");
      std::vector<Mark> marks;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::string p = schema::index(schema::join(path, "values"), i);
        marks.push_back(vals[i].is_number() ? make_point({schema::number(vals[i], p)}) : schema::point(vals[i], p));
      }
      const auto weights = schema::numbers(schema::require(v, "weights", path), schema::join(path, "weights"));
      return JumpMeasure::atoms(num("mass"), std::move(marks), weights);
    }
    if (law == "symmetric_power") {
      schema::allow_keys(v, {"law", "intensity", "index", "upper", "lower"}, path);
      const json* lo = schema::find(v, "lower");
      return JumpMeasure::symmetric_power(num("intensity"), num("index"), num("upper"),
                                          lo ? schema::nonnegative(*lo, schema::join(path, "lower")) : 0.0);
    }
  } catch (const ModelError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(schema::join(path, "law"), "unknown jump law '" + law + "'");
}

namespace {

double second_moment(const JumpMeasure& pi) {
  if (pi.law() == MarkLaw::none) return 0.0;
  if (!pi.finite()) return std::numeric_limits<double>::infinity();
  IntegrationBudget quad;
  RandomStream rng(1, 0, Substream::generator_marks);
  return pi.integrate([](const Mark& u) { return u.squaredNorm(); }, quad, &rng).value;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coupled OU
// ---------------------------------------------------------------------------

ModelSpec make_coupled_ou(const CoupledOuParams& p) {
  ModelSpec m;
  m.family = "coupled-ou";
  m.dimension = 1;
  const RegimeFunction alpha = p.alpha, sigma = p.sigma, beta = p.beta;
  m.drift = [alpha](const Point& x, Regime k) { return Point(alpha(k) * x); };
  m.diffusion = [sigma](const Point&, Regime k) { return Matrix(Matrix::Constant(1, 1, sigma(k))); };
  m.jump = [beta](const Point&, Regime k, const Mark& u) { return make_point({beta(k) * u(0)}); };
  m.jumps = p.jumps;
  if (m.jumps.law() != MarkLaw::none && m.jumps.mark_dim() != 1) throw ModelError("coupled-ou marks are scalar");
  m.rates = p.rates.matrix();
  m.holder_exponent = p.holder_exponent;
  m.affine_regime = [alpha, sigma](Regime k) -> std::optional<AffineRegime> {
    AffineRegime a;
    a.drift_matrix = Matrix::Constant(1, 1, alpha(k));
    a.drift_offset = Point::Zero(1);
    a.diffusion = Matrix::Constant(1, 1, sigma(k));
    return a;
  };

  if (p.growth_bound) {
    m.growth_bound = p.growth_bound;
  } else {
    // H over the materialized regimes, when that set is finite
    std::optional<Regime> last;
    if (!m.rates.is_zero()) last = p.rates.max_regime;
    for (const auto& f : {alpha, sigma, beta})
      if (auto l = f.last_regime()) last = last ? std::min(*last, *l) : *l;
    if (last) {
      const double m2 = second_moment(p.jumps);
      double h = 0.0;
      for (Regime k = 0; k <= *last; ++k) {
        const double a = alpha(k), s = sigma(k), b = beta(k);
        h = std::max({h, a * a, s * s + b * b * m2});
        if (!m.rates.is_zero()) h = std::max({h, p.rates.row_supremum(k) / (k + 1.0), p.rates.row_lipschitz(k)});
      }
      if (h > 0.0) m.growth_bound = h;
    }
  }
  return m;
}

CoupledOuParams ou_example_instance(Regime max_regime) {
  CoupledOuParams p;
  p.alpha = RegimeFunction::affine(-2.0, -1.0);
  p.sigma = RegimeFunction::rational(1.0, 0.0, 1.0, 1.0).square_root();
  p.beta = RegimeFunction::rational(1.0, 0.0, 1.0, 1.0).square_root();
  p.jumps = JumpMeasure::laplace(1.0, 1.0);
  p.rates.kappa = 1;
  p.rates.entries[1] = RateFunction::constant(1.0);
  p.rates.entries[-1] = RateFunction::constant(1.0);
  p.rates.max_regime = max_regime;
  return p;
}

// ---------------------------------------------------------------------------
// Affine
// ---------------------------------------------------------------------------

ModelSpec make_affine(const AffineParams& p) {
  if (p.dimension < 1 || p.dimension > kMaxDim) throw ModelError("affine dimension must lie in [1, 8]");
  if (p.regimes.empty()) throw ModelError("affine family needs at least one regime");
  const int d = p.dimension;
  for (const auto& r : p.regimes) {
    if (r.drift_matrix.rows() != d || r.drift_matrix.cols() != d || r.drift_offset.size() != d ||
        r.diffusion.rows() != d || r.diffusion.cols() != d)
      throw ModelError("affine regime coefficient has the wrong shape");
    if (p.jumps.law() != MarkLaw::none && (r.jump_matrix.rows() != d || r.jump_matrix.cols() != p.jumps.mark_dim()))
      throw ModelError("affine jump matrix must be d x mark_dim");
  }
  const Regime last = static_cast<Regime>(p.regimes.size()) - 1;
  BandedRates rates = p.rates;
  if (p.switching) {
    if (rates.max_regime && *rates.max_regime > last)
      throw ModelError("rates.max_regime exceeds the number of affine regimes");
    if (!rates.max_regime) rates.max_regime = last;
  }

  ModelSpec m;
  m.family = "affine";
  m.dimension = d;
  auto regimes = std::make_shared<const std::vector<AffineRegimeParams>>(p.regimes);
  auto at = [regimes](Regime k) -> const AffineRegimeParams& {
    if (k < 0 || static_cast<std::size_t>(k) >= regimes->size())
      throw ModelError("regime " + std::to_string(k) + " is not defined by the affine family");
    return (*regimes)[static_cast<std::size_t>(k)];
  };
  m.drift = [at](const Point& x, Regime k) {
    const auto& r = at(k);
    return Point(r.drift_matrix * x + r.drift_offset);
  };
  m.diffusion = [at](const Point&, Regime k) { return at(k).diffusion; };
  if (p.jumps.law() != MarkLaw::none)
    m.jump = [at](const Point&, Regime k, const Mark& u) { return Point(at(k).jump_matrix * u); };
  m.jumps = p.jumps;
  m.rates = p.switching ? rates.matrix() : RateMatrix::zero();
  m.holder_exponent = p.holder_exponent;
  m.affine_regime = [at](Regime k) -> std::optional<AffineRegime> {
    const auto& r = at(k);
    return AffineRegime{r.drift_matrix, r.drift_offset, r.diffusion};
  };

  if (p.growth_bound) {
    m.growth_bound = p.growth_bound;
  } else {
    const double m2 = second_moment(p.jumps);
    double h = 0.0;
    for (Regime k = 0; k <= last; ++k) {
      const auto& r = at(k);
      const double a = r.drift_matrix.operatorNorm();
      const double jump = p.jumps.law() == MarkLaw::none ? 0.0 : std::pow(r.jump_matrix.operatorNorm(), 2) * m2;
      const double off = r.drift_offset.squaredNorm();
      // |Ax + a|^2 <= 2|A|^2|x|^2 + 2|a|^2 when a != 0
      const double lin = off > 0.0 ? 2.0 * a * a : a * a;
      h = std::max({h, lin, 2.0 * off + r.diffusion.squaredNorm() + jump});
      if (p.switching) h = std::max({h, rates.row_supremum(k) / (k + 1.0), rates.row_lipschitz(k)});
    }
    if (h > 0.0) m.growth_bound = h;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

void read_common(const json& model, const std::string& path, std::optional<double>& h, std::optional<double>& delta) {
  if (const json* v = schema::find(model, "H")) h = schema::positive(*v, schema::join(path, "H"));
  if (const json* v = schema::find(model, "delta")) {
    const double d = schema::number(*v, schema::join(path, "delta"));
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError(schema::join(path, "delta"), "must lie in (0, 1]");
    delta = d;
  }
}

}  // namespace

CoupledOuParams parse_coupled_ou(const json& model, const std::string& path) {
  schema::allow_keys(model, {"family", "params", "jumps", "rates", "H", "delta"}, path);
  const std::string pp = schema::join(path, "params");
  const json& params = schema::require(model, "params", path);
  schema::allow_keys(params, {"alpha", "sigma", "sigma_sq", "beta", "beta_sq"}, pp);
  auto either = [&](const char* plain, const char* squared) {
    const json* a = schema::find(params, plain);
    const json* b = schema::find(params, squared);
    if (a && b) throw ConfigError(schema::join(pp, plain), std::string("give either ") + plain + " or " + squared);
    if (a) return RegimeFunction::parse(*a, schema::join(pp, plain));
    if (b) return RegimeFunction::parse(*b, schema::join(pp, squared)).square_root();
    throw ConfigError(schema::join(pp, plain), "required");
  };
  CoupledOuParams p;
  p.alpha = RegimeFunction::parse(schema::require(params, "alpha", pp), schema::join(pp, "alpha"));
  p.sigma = either("sigma", "sigma_sq");
  const json* has_beta = schema::find(params, "beta");
  const json* has_beta_sq = schema::find(params, "beta_sq");
  p.beta = (has_beta || has_beta_sq) ? either("beta", "beta_sq") : RegimeFunction::constant(0.0);
  if (const json* j = schema::find(model, "jumps")) p.jumps = parse_jump_measure(*j, 1, schema::join(path, "jumps"));
  if (const json* r = schema::find(model, "rates")) p.rates = BandedRates::parse(*r, schema::join(path, "rates"));
  read_common(model, path, p.growth_bound, p.holder_exponent);
  return p;
}

namespace {

ModelSpec build_coupled_ou(const json& model, const std::string& path) {
  const CoupledOuParams p = parse_coupled_ou(model, path);
  try {
    return make_coupled_ou(p);
  } catch (const ModelError& e) {
    throw ConfigError(path, e.what());
  }
}

ModelSpec build_affine(const json& model, const std::string& path) {
  schema::allow_keys(model, {"family", "params", "jumps", "rates", "H", "delta"}, path);
  const std::string pp = schema::join(path, "params");
  const json& params = schema::require(model, "params", path);
  schema::allow_keys(params, {"dimension", "regimes"}, pp);
  AffineParams p;
  p.dimension = static_cast<int>(schema::integer_at_least(schema::require(params, "dimension", pp), 1, schema::join(pp, "dimension")));
  if (p.dimension > kMaxDim) throw ConfigError(schema::join(pp, "dimension"), "at most " + std::to_string(kMaxDim));
  if (const json* j = schema::find(model, "jumps")) p.jumps = parse_jump_measure(*j, p.dimension, schema::join(path, "jumps"));
  const json& regimes = schema::require(params, "regimes", pp);
  const std::string rp = schema::join(pp, "regimes");
  if (!regimes.is_array() || regimes.empty()) throw ConfigError(rp, "expected a non-empty array");
  const int d = p.dimension;
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    const std::string ip = schema::index(rp, i);
    const json& r = regimes[i];
    schema::allow_keys(r, {"drift_matrix", "drift_offset", "diffusion", "jump_matrix"}, ip);
    AffineRegimeParams a;
    a.drift_matrix = schema::matrix(schema::require(r, "drift_matrix", ip), d, schema::join(ip, "drift_matrix"));
    a.drift_offset = Point::Zero(d);
    if (const json* o = schema::find(r, "drift_offset")) {
      a.drift_offset = schema::point(*o, schema::join(ip, "drift_offset"));
      if (a.drift_offset.size() != d) throw ConfigError(schema::join(ip, "drift_offset"), "wrong length");
    }
    a.diffusion = schema::matrix(schema::require(r, "diffusion", ip), d, schema::join(ip, "diffusion"));
    a.jump_matrix = Matrix::Zero(d, p.jumps.mark_dim());
    if (const json* jm = schema::find(r, "jump_matrix")) {
      if (p.jumps.mark_dim() != d) throw ConfigError(schema::join(ip, "jump_matrix"), "needs mark_dim equal to dimension");
      a.jump_matrix = schema::matrix(*jm, d, schema::join(ip, "jump_matrix"));
    }
    p.regimes.push_back(a);
  }
  if (const json* r = schema::find(model, "rates")) {
    p.rates = BandedRates::parse(*r, schema::join(path, "rates"));
    p.switching = true;
  }
  read_common(model, path, p.growth_bound, p.holder_exponent);
  try {
    return make_affine(p);
  } catch (const ModelError& e) {
    throw ConfigError(path, e.what());
  }
}

struct Registry {
  std::mutex mutex;
  std::vector<ModelFamily> families;

  Registry() {
    families.push_back(
        {"coupled-ou",
         "coupled one-dimensional Ornstein-Uhlenbeck regimes: dX = alpha_k X dt + sigma_k dB + beta_k dN",
         {{"params.alpha", "regime function", "drift coefficient alpha_k"},
          {"params.sigma | params.sigma_sq", "regime function", "diffusion sigma_k (or its square)"},
          {"params.beta | params.beta_sq", "regime function", "jump scale beta_k (or its square); default 0"},
          {"jumps", "jump measure", "mark law; default laplace with mass 1, scale 1"},
          {"rates", "banded rates", "switching rates; omitted means no switching"},
          {"H", "number > 0", "growth constant; computed when the regime set is finite"},
          {"delta", "number in (0,1]", "Hölder exponent of the rates; default 1"}},
         build_coupled_ou});
    families.push_back(
        {"affine",
         "affine regimes in R^d: dX = (A_k X + a_k) dt + S_k dB + B_k dN",
         {{"params.dimension", "integer 1..8", "state dimension d"},
          {"params.regimes[]", "{drift_matrix, drift_offset?, diffusion, jump_matrix?}", "one entry per regime"},
          {"jumps", "jump measure", "mark law with mark_dim = d when jump_matrix is used"},
          {"rates", "banded rates", "switching rates; max_regime defaults to the last listed regime"},
          {"H", "number > 0", "growth constant; computed from the matrices when omitted"},
          {"delta", "number in (0,1]", "Hölder exponent of the rates; default 1"}},
         build_affine});
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_family(ModelFamily family) {
  if (family.name.empty() || !family.build) throw std::invalid_argument("a model family needs a name and a builder");
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = std::find_if(r.families.begin(), r.families.end(), [&](const auto& f) { return f.name == family.name; });
  if (it != r.families.end())
    *it = std::move(family);
  else
    r.families.push_back(std::move(family));
}

std::vector<ModelFamily> list_models(std::string_view filter) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<ModelFamily> out;
  for (const auto& f : r.families)
    if (filter.empty() || f.name.find(filter) != std::string::npos) out.push_back(f);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

ModelSpec build_model(const json& model, const std::string& path) {
  const std::string name = schema::string(schema::require(model, "family", path), schema::join(path, "family"));
  std::function<ModelSpec(const json&, const std::string&)> build;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    for (const auto& f : r.families)
      if (f.name == name) build = f.build;
  }
  if (!build) throw ConfigError(schema::join(path, "family"), "unknown model family '" + name + "'");
  ModelSpec spec = build(model, path);
  try {
    spec.check();
  } catch (const ModelError& e) {
    throw ConfigError(path, e.what());
  }
  return spec;
}

}  // namespace rsjd
