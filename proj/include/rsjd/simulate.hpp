#pragma once

#include "rsjd/drivers.hpp"
#include "rsjd/model.hpp"
#include "rsjd/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsjd {

enum class ClockScheme { grid_integrated, thinning };

enum class PathStatus { completed, exploded, ceiling };
std::string to_string(PathStatus s);
std::string to_string(ClockScheme s);

struct SimConfig {
  double horizon = 1.0;  // T
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::size_t paths = 1;
  double explosion_radius = 1e6;
  Regime regime_ceiling = 1000;
  ClockScheme clock = ClockScheme::grid_integrated;
  /// Marks with |u| below this level are dropped (and compensated) when Pi is sigma-finite.
  std::optional<double> truncation;
  unsigned workers = 1;

  /// Throws std::invalid_argument when the run cannot start from (x0, k0).
  void check(const Point& x0, Regime k0) const;
};

enum class EventTag : std::uint8_t { start, grid, jump, switch_epoch, checkpoint };
std::string to_string(EventTag t);

struct PathPoint {
  double t = 0.0;
  Point x;
  Regime k = 0;
  EventTag tag = EventTag::grid;
  int checkpoint = -1;  // index into the requested checkpoint list
};

struct SwitchEvent {
  double t = 0.0;
  Regime from = 0;
  Regime to = 0;
  Point x;
};

struct JumpEvent {
  double t = 0.0;
  Mark mark;
  Point displacement;  // c(X(t-), Lambda(t-), u) as evaluated
  Regime k = 0;
};

/// Receives the recorded points of a path in time order. A jump or switch is
/// announced before the point that carries the post-event state.
class PathObserver {
 public:
  virtual ~PathObserver() = default;
  virtual void on_point(const PathPoint&) {}
  virtual void on_switch(const SwitchEvent&) {}
  virtual void on_jump(const JumpEvent&) {}
};

struct HybridPath {
  std::vector<PathPoint> points;
  std::vector<SwitchEvent> switches;
  std::vector<JumpEvent> jumps;
  PathStatus status = PathStatus::completed;
  std::string diagnostic;
};

/// Records everything into a HybridPath; grid points may be thinned by `stride`.
class PathRecorder : public PathObserver {
 public:
  explicit PathRecorder(HybridPath& path, std::size_t stride = 1) : path_(path), stride_(stride) {}
  void on_point(const PathPoint& p) override;
  void on_switch(const SwitchEvent& s) override { path_.switches.push_back(s); }
  void on_jump(const JumpEvent& j) override { path_.jumps.push_back(j); }

 private:
  HybridPath& path_;
  std::size_t stride_;
  std::size_t grid_seen_ = 0;
};

/// Fans events out to several observers.
class ObserverList : public PathObserver {
 public:
  void add(PathObserver& o) { observers_.push_back(&o); }
  void on_point(const PathPoint& p) override {
    for (auto* o : observers_) o->on_point(p);
  }
  void on_switch(const SwitchEvent& s) override {
    for (auto* o : observers_) o->on_switch(s);
  }
  void on_jump(const JumpEvent& j) override {
    for (auto* o : observers_) o->on_jump(j);
  }

 private:
  std::vector<PathObserver*> observers_;
};

/// How a regime segment ends.
struct SegmentRule {
  enum class Kind { clock, thinning, fixed_time, never };
  Kind kind = Kind::never;
  double threshold = 0.0;  // clock: exponential variate xi; fixed_time: the epoch
  double majorant = 0.0;   // thinning: dominating rate
  double first_candidate = 0.0;  // thinning: first candidate epoch

  static SegmentRule clock(double xi) { return {Kind::clock, xi, 0.0, 0.0}; }
  static SegmentRule fixed(double epoch) { return {Kind::fixed_time, epoch, 0.0, 0.0}; }
  static SegmentRule never() { return {}; }
};

/// Euler-Maruyama integrator for the regime-frozen SDE with jumps on the dt
/// grid. Jump epochs, checkpoints and switch epochs become extra grid points;
/// the Brownian path inside a grid cell is refined by bridge sampling.
class RegimeIntegrator {
 public:
  RegimeIntegrator(const ModelSpec& model, const SimConfig& config, std::uint64_t path_index, const Point& x0,
                   Regime k0, std::span<const double> checkpoints = {}, std::uint64_t salt = 0);

  struct Outcome {
    bool switched = false;  // false: horizon reached or path terminated
    double time = 0.0;
  };

  /// Integrates the current regime until the rule fires, T, or a guard trips.
  Outcome run_segment(const SegmentRule& rule, PathObserver& observer);

  /// Moves the regime component (X is continuous across a switch).
  void set_regime(Regime k) { k_ = k; }

  double time() const { return t_; }
  const Point& state() const { return x_; }
  Regime regime() const { return k_; }
  PathStatus status() const { return status_; }
  bool finished() const { return status_ != PathStatus::completed || t_ >= config_.horizon; }
  void terminate(PathStatus s) { status_ = s; }
  /// Stream for the switch clock (exponential thresholds, thinning).
  RandomStream& clock_stream() { return clock_rng_; }
  /// Label of the checkpoint at the current time, if any (for switch points).
  int checkpoint_at(double t) const;
  /// As checkpoint_at, but marks the checkpoint as emitted so it is not labelled twice.
  int consume_checkpoint(double t);

 private:
  void ensure_cell();
  Point compensated_drift(const Point& x, Regime k) const;
  bool guard_ok(const Point& x) const;

  const ModelSpec& model_;
  SimConfig config_;
  JumpMeasure jumps_;
  std::optional<JumpMeasure> compensated_;
  std::vector<double> checkpoints_;
  std::size_t next_checkpoint_ = 0;
  RandomStream brownian_rng_, bridge_rng_, clock_rng_;
  JumpSource jump_source_;
  BrownianCell cell_;
  std::uint64_t cell_index_ = 0;
  bool cell_ready_ = false;
  double t_ = 0.0;
  Point x_;
  Regime k_ = 0;
  PathStatus status_ = PathStatus::completed;
};

/// Draws the post-switch regime: l != k with probability q_kl(x)/q_k(x), or k
/// when q_k(x) = 0. Realized through the interval partition and h_eval.
Regime sample_switch_target(const ModelSpec& model, const Point& x, Regime k, RandomStream& rng);

struct SegmentResult {
  HybridPath segment;
  bool switched = false;
  std::optional<double> switch_time;
};

/// One regime-k segment starting at time 0 from x0 with clock threshold xi.
SegmentResult simulate_regime_segment(const ModelSpec& model, const Point& x0, Regime k, double xi,
                                      const SimConfig& config, std::uint64_t path_index = 0);

struct PathOptions {
  std::vector<double> checkpoints;
  std::uint64_t path_index = 0;
  std::uint64_t salt = 0;
  bool freeze_regime = false;  // ignore switching (regime-frozen dynamics)
};

/// Interlacing construction: alternates regime segments and switches until T,
/// explosion or the regime ceiling. The status is always recorded.
PathStatus run_hybrid(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                      const PathOptions& options, PathObserver& observer);

HybridPath simulate_hybrid(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                           const PathOptions& options = {});

struct BatchOptions {
  std::vector<double> checkpoints;   // defaults to {T}
  std::optional<double> average_from;  // time-average functionals over [from, T]
  std::size_t retain_paths = 0;
  std::size_t retain_stride = 1;
  bool freeze_regime = false;
};

/// Ensemble summary. Functionals are x[i], |x|^2, lambda and lambda^2.
struct EnsembleStats {
  std::vector<double> times;
  std::vector<std::string> functionals;
  // [functional][checkpoint]
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> variance;
  std::vector<std::vector<double>> std_error;
  MeanEstimate sup_x_sq;       // E sup_{t<=T} |X(t)|^2
  MeanEstimate sup_lambda_sq;  // E sup_{t<=T} Lambda(t)^2
  std::vector<MeanEstimate> time_average;  // per functional, when requested
  std::size_t completed = 0;
  std::size_t exploded = 0;
  std::size_t ceiling = 0;
  std::vector<HybridPath> retained;

  std::size_t functional_index(const std::string& name) const;
};

EnsembleStats simulate_batch(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                             const BatchOptions& options = {});

/// Values of the ensemble functionals at a state.
std::vector<double> ensemble_functionals(const Point& x, Regime k);
std::vector<std::string> ensemble_functional_names(int dimension);

}  // namespace rsjd
