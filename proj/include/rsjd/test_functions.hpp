#pragma once

#include "rsjd/families.hpp"
#include "rsjd/schema.hpp"
#include "rsjd/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rsjd {

/// Scalar test function f(x, k) with optional analytic derivatives in x.
struct TestFunction {
  std::string name;
  std::function<double(const Point&, Regime)> value;
  std::function<Point(const Point&, Regime)> gradient;  // empty: finite differences
  std::function<Matrix(const Point&, Regime)> hessian;  // empty: finite differences
  bool smooth = true;    // false for indicators; the generator refuses these
  bool bounded = false;

  double operator()(const Point& x, Regime k) const { return value(x, k); }
  bool has_derivatives() const { return static_cast<bool>(gradient) && static_cast<bool>(hessian); }
};

/// Smooth clip of s >= 0: s below `level`, then level + w (sqrt(pi)/2) erf((s - level)/w).
/// C^2, increasing, bounded by level + w sqrt(pi)/2.
struct SmoothClip {
  double level = 1.0;
  double width = 1.0;
  double value(double s) const;
  double first(double s) const;
  double second(double s) const;
};

namespace test_functions {

TestFunction constant(double c);
TestFunction coordinate(int index);
TestFunction monomial(int index, int power);
TestFunction regime();
TestFunction regime_indicator(Regime r);
/// (k+1)|x|^2
TestFunction lyapunov_ou();
/// S(|x|^2) with S the smooth clip; the optional factor multiplies by (k+1).
TestFunction clipped_quadratic(SmoothClip clip, bool regime_weighted = false);
/// g_k |x|^p
TestFunction weighted_power(double p, RegimeFunction g);
/// 1{lo <= x <= hi} coordinate-wise
TestFunction box_indicator(Point lo, Point hi);

}  // namespace test_functions

/// {"name": "...", ...params}. Names: constant, coordinate, monomial, regime,
/// regime-indicator, lyapunov-ou, clipped-quadratic, weighted-power, box-indicator.
TestFunction parse_test_function(const schema::json& v, int dimension, const std::string& path);

struct TestFunctionDoc {
  std::string name;
  std::string params;
  std::string description;
};
std::vector<TestFunctionDoc> list_test_functions();

}  // namespace rsjd
