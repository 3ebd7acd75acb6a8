#pragma once

#include "rsjd/model.hpp"
#include "rsjd/rng.hpp"

#include <limits>
#include <vector>

namespace rsjd {

/// Brownian path restricted to one grid cell [lo, hi]. The cell increment is
/// drawn once; interior values are filled in by Brownian-bridge sampling on
/// demand and remembered, so every query of the same time sees the same value.
class BrownianCell {
 public:
  BrownianCell() = default;

  void reset(double lo, double hi, const Point& increment) {
    knots_.clear();
    knots_.push_back({lo, Point::Zero(increment.size())});
    knots_.push_back({hi, increment});
  }

  double lo() const { return knots_.front().time; }
  double hi() const { return knots_.back().time; }

  /// W(s) - W(lo) for s in [lo, hi].
  Point at(double s, RandomStream& bridge_rng) {
    if (s <= knots_.front().time) return knots_.front().value;
    if (s >= knots_.back().time) return knots_.back().value;
    std::size_t i = 1;
    while (knots_[i].time < s) ++i;
    if (knots_[i].time == s) return knots_[i].value;
    const Knot& left = knots_[i - 1];
    const Knot& right = knots_[i];
    const double span = right.time - left.time;
    const double w = (s - left.time) / span;
    const double sd = std::sqrt((s - left.time) * (right.time - s) / span);
    Point v = left.value + w * (right.value - left.value);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) += sd * bridge_rng.normal();
    knots_.insert(knots_.begin() + static_cast<std::ptrdiff_t>(i), Knot{s, v});
    return v;
  }

 private:
  struct Knot {
    double time;
    Point value;
  };
  std::vector<Knot> knots_;
};

/// Homogeneous Poisson stream of jump epochs with iid marks, for a finite Pi.
class JumpSource {
 public:
  JumpSource(const JumpMeasure& measure, RandomStream times, RandomStream marks)
      : measure_(measure), times_(times), marks_(marks), rate_(measure.total_mass()) {
    next_ = rate_ > 0.0 ? times_.exponential() / rate_ : std::numeric_limits<double>::infinity();
  }

  double next_time() const { return next_; }

  /// Consumes the pending epoch and returns its mark.
  Mark take() {
    Mark u = measure_.sample(marks_);
    next_ += times_.exponential() / rate_;
    return u;
  }

 private:
  JumpMeasure measure_;
  RandomStream times_;
  RandomStream marks_;
  double rate_ = 0.0;
  double next_ = std::numeric_limits<double>::infinity();
};

}  // namespace rsjd
