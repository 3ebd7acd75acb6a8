#include "rsjd/test_functions.hpp"

#include <cmath>
#include <numbers>

namespace rsjd {

double SmoothClip::value(double s) const {
  if (s <= level) return s;
  return level + width * 0.5 * std::sqrt(std::numbers::pi) * std::erf((s - level) / width);
}

double SmoothClip::first(double s) const {
  if (s <= level) return 1.0;
  const double z = (s - level) / width;
  return std::exp(-z * z);
}

double SmoothClip::second(double s) const {
  if (s <= level) return 0.0;
  const double z = (s - level) / width;
  return -2.0 * z / width * std::exp(-z * z);
}

namespace test_functions {

TestFunction constant(double c) {
  TestFunction f;
  f.name = "constant";
  f.value = [c](const Point&, Regime) { return c; };
  f.gradient = [](const Point& x, Regime) { return Point(Point::Zero(x.size())); };
  f.hessian = [](const Point& x, Regime) { return Matrix(Matrix::Zero(x.size(), x.size())); };
  f.bounded = true;
  return f;
}

TestFunction coordinate(int index) { return monomial(index, 1); }

TestFunction monomial(int index, int power) {
  if (index < 0 || power < 0) throw std::invalid_argument("monomial needs index >= 0 and power >= 0");
  TestFunction f;
  f.name = power == 1 ? "coordinate" : "monomial";
  f.value = [=](const Point& x, Regime) { return std::pow(x(index), power); };
  f.gradient = [=](const Point& x, Regime) {
    Point g = Point::Zero(x.size());
    if (power > 0) g(index) = power * std::pow(x(index), power - 1);
    return g;
  };
  f.hessian = [=](const Point& x, Regime) {
    Matrix h = Matrix::Zero(x.size(), x.size());
    if (power > 1) h(index, index) = power * (power - 1.0) * std::pow(x(index), power - 2);
    return h;
  };
  f.bounded = power == 0;
  return f;
}

TestFunction regime() {
  TestFunction f = constant(0.0);
  f.name = "regime";
  f.value = [](const Point&, Regime k) { return static_cast<double>(k); };
  f.bounded = false;
  return f;
}

TestFunction regime_indicator(Regime r) {
  TestFunction f = constant(0.0);
  f.name = "regime-indicator";
  f.value = [r](const Point&, Regime k) { return k == r ? 1.0 : 0.0; };
  return f;
}

TestFunction lyapunov_ou() {
  TestFunction f;
  f.name = "lyapunov-ou";
  f.value = [](const Point& x, Regime k) { return (k + 1.0) * x.squaredNorm(); };
  f.gradient = [](const Point& x, Regime k) { return Point(2.0 * (k + 1.0) * x); };
  f.hessian = [](const Point& x, Regime k) {
    return Matrix(2.0 * (k + 1.0) * Matrix::Identity(x.size(), x.size()));
  };
  return f;
}

TestFunction clipped_quadratic(SmoothClip clip, bool regime_weighted) {
  if (!(clip.level > 0.0) || !(clip.width > 0.0)) throw std::invalid_argument("clip level and width must be positive");
  TestFunction f;
  f.name = "clipped-quadratic";
  auto w = [regime_weighted](Regime k) { return regime_weighted ? k + 1.0 : 1.0; };
  f.value = [=](const Point& x, Regime k) { return w(k) * clip.value(x.squaredNorm()); };
  f.gradient = [=](const Point& x, Regime k) { return Point(w(k) * 2.0 * clip.first(x.squaredNorm()) * x); };
  f.hessian = [=](const Point& x, Regime k) {
    const double s = x.squaredNorm();
    Matrix h = 2.0 * clip.first(s) * Matrix::Identity(x.size(), x.size());
    h += 4.0 * clip.second(s) * (x * x.transpose());
    return Matrix(w(k) * h);
  };
  f.bounded = !regime_weighted;
  return f;
}

TestFunction weighted_power(double p, RegimeFunction g) {
  // |x|^p is not C^2 at the origin for p < 2
  TestFunction f;
  f.name = "weighted-power";
  f.value = [=](const Point& x, Regime k) { return g(k) * std::pow(x.norm(), p); };
  f.gradient = [=](const Point& x, Regime k) {
    const double r = x.norm();
    if (r == 0.0) return Point(Point::Zero(x.size()));
    return Point(g(k) * p * std::pow(r, p - 2.0) * x);
  };
  f.hessian = [=](const Point& x, Regime k) {
    const double r = x.norm();
    const int d = static_cast<int>(x.size());
    if (r == 0.0) return Matrix(p == 2.0 ? Matrix(2.0 * g(k) * Matrix::Identity(d, d)) : Matrix(Matrix::Zero(d, d)));
    Matrix h = p * std::pow(r, p - 2.0) * Matrix::Identity(d, d);
    h += p * (p - 2.0) * std::pow(r, p - 4.0) * (x * x.transpose());
    return Matrix(g(k) * h);
  };
  return f;
}

TestFunction box_indicator(Point lo, Point hi) {
  if (lo.size() != hi.size() || (hi.array() < lo.array()).any()) throw std::invalid_argument("box needs lo <= hi");
  TestFunction f;
  f.name = "box-indicator";
  f.value = [lo, hi](const Point& x, Regime) {
    return ((x.array() >= lo.array()).all() && (x.array() <= hi.array()).all()) ? 1.0 : 0.0;
  };
  f.smooth = false;
  f.bounded = true;
  return f;
}

}  // namespace test_functions

TestFunction parse_test_function(const schema::json& v, int dimension, const std::string& path) {
  using namespace schema;
  const std::string name = string(require(v, "name", path), join(path, "name"));
  auto index_of = [&](const char* key) {
    const json* i = find(v, key);
    const long long idx = i ? integer_at_least(*i, 0, join(path, key)) : 0;
    if (idx >= dimension) throw ConfigError(join(path, key), "coordinate index out of range");
    return static_cast<int>(idx);
  };
  if (name == "constant") {
    allow_keys(v, {"name", "value"}, path);
    const json* c = find(v, "value");
    return test_functions::constant(c ? number(*c, join(path, "value")) : 1.0);
  }
  if (name == "coordinate") {
    allow_keys(v, {"name", "index"}, path);
    return test_functions::coordinate(index_of("index"));
  }
  if (name == "monomial") {
    allow_keys(v, {"name", "index", "power"}, path);
    return test_functions::monomial(index_of("index"),
                                    static_cast<int>(integer_at_least(require(v, "power", path), 0, join(path, "power"))));
  }
  if (name == "regime") {
    allow_keys(v, {"name"}, path);
    return test_functions::regime();
  }
  if (name == "regime-indicator") {
    allow_keys(v, {"name", "regime"}, path);
    return test_functions::regime_indicator(
        static_cast<Regime>(integer_at_least(require(v, "regime", path), 0, join(path, "regime"))));
  }
  if (name == "lyapunov-ou") {
    allow_keys(v, {"name"}, path);
    return test_functions::lyapunov_ou();
  }
  if (name == "clipped-quadratic") {
    allow_keys(v, {"name", "level", "width", "regime_weighted"}, path);
    SmoothClip clip;
    clip.level = positive(require(v, "level", path), join(path, "level"));
    if (const json* w = find(v, "width")) clip.width = positive(*w, join(path, "width"));
    const json* rw = find(v, "regime_weighted");
    return test_functions::clipped_quadratic(clip, rw && boolean(*rw, join(path, "regime_weighted")));
  }
  if (name == "weighted-power") {
    allow_keys(v, {"name", "power", "weights"}, path);
    const double p = number(require(v, "power", path), join(path, "power"));
    if (!(p > 0.0)) throw ConfigError(join(path, "power"), "must be positive");
    const json* g = find(v, "weights");
    return test_functions::weighted_power(p, g ? RegimeFunction::parse(*g, join(path, "weights"))
                                               : RegimeFunction::constant(1.0));
  }
  if (name == "box-indicator") {
    allow_keys(v, {"name", "lo", "hi"}, path);
    const Point lo = point(require(v, "lo", path), join(path, "lo"));
    const Point hi = point(require(v, "hi", path), join(path, "hi"));
    if (lo.size() != dimension || hi.size() != dimension) throw ConfigError(path, "box corners must have dimension d");
    if ((hi.array() < lo.array()).any()) throw ConfigError(join(path, "hi"), "must be >= lo");
    return test_functions::box_indicator(lo, hi);
  }
  throw ConfigError(join(path, "name"), "unknown test function '" + name + "'");
}

std::vector<TestFunctionDoc> list_test_functions() {
  return {
      {"constant", "value", "f = value"},
      {"coordinate", "index", "f = x_index"},
      {"monomial", "index, power", "f = x_index^power"},
      {"regime", "", "f = k"},
      {"regime-indicator", "regime", "f = 1{k = regime}"},
      {"lyapunov-ou", "", "f = (k+1)|x|^2"},
      {"clipped-quadratic", "level, width, regime_weighted", "f = S(|x|^2), smooth clip above level"},
      {"weighted-power", "power, weights", "f = g_k |x|^power"},
      {"box-indicator", "lo, hi", "f = 1{lo <= x <= hi}"},
  };
}

}  // namespace rsjd
