#include "rsjd/simulate.hpp"

#include "rsjd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rsjd {

std::string to_string(PathStatus s) {
  switch (s) {
    case PathStatus::completed:
      return "completed";
    case PathStatus::exploded:
      return "exploded";
    default:
      return "ceiling";
  }
}

std::string to_string(ClockScheme s) { return s == ClockScheme::thinning ? "thinning" : "grid"; }

std::string to_string(EventTag t) {
  switch (t) {
    case EventTag::start:
      return "start";
    case EventTag::grid:
      return "grid";
    case EventTag::jump:
      return "jump";
    case EventTag::switch_epoch:
      return "switch";
    default:
      return "checkpoint";
  }
}

void SimConfig::check(const Point& x0, Regime k0) const {
  if (!(horizon > 0.0)) throw std::invalid_argument("run.T must be positive");
  if (!(dt > 0.0) || !(dt < horizon)) throw std::invalid_argument("run.dt must satisfy 0 < dt < T");
  if (paths < 1) throw std::invalid_argument("run.paths must be positive");
  if (!x0.allFinite()) throw std::invalid_argument("initial state must be finite");
  if (!(explosion_radius > x0.norm())) throw std::invalid_argument("run.explosion_radius must exceed |x0|");
  if (k0 < 0) throw std::invalid_argument("initial regime must be nonnegative");
  if (!(regime_ceiling > k0)) throw std::invalid_argument("run.regime_ceiling must exceed the initial regime");
  if (truncation && !(*truncation > 0.0)) throw std::invalid_argument("run.truncation must be positive");
}

void PathRecorder::on_point(const PathPoint& p) {
  if (p.tag == EventTag::grid && p.checkpoint < 0) {
    const bool keep = grid_seen_ % stride_ == 0;
    ++grid_seen_;
    if (!keep) return;
  }
  path_.points.push_back(p);
}

// ---------------------------------------------------------------------------
// RegimeIntegrator
// ---------------------------------------------------------------------------

namespace {

JumpMeasure finite_part(const ModelSpec& model, const SimConfig& config) {
  if (model.jumps.finite()) return model.jumps;
  if (!config.truncation)
    throw UnsupportedModel("sigma-finite jump measure needs run.truncation (small-jump truncation level)");
  return model.jumps.truncated(*config.truncation);
}

double snap_to_grid(double c, double dt, double horizon) {
  if (std::abs(c - horizon) <= 1e-9 * dt) return horizon;
  const double n = std::round(c / dt);
  const double g = n * dt;
  return std::abs(g - c) <= 1e-9 * dt ? g : c;
}

}  // namespace

RegimeIntegrator::RegimeIntegrator(const ModelSpec& model, const SimConfig& config, std::uint64_t path_index,
                                   const Point& x0, Regime k0, std::span<const double> checkpoints,
                                   std::uint64_t salt)
    : model_(model),
      config_(config),
      jumps_(finite_part(model, config)),
      brownian_rng_(config.seed, path_index, Substream::brownian, salt),
      bridge_rng_(config.seed, path_index, Substream::bridge, salt),
      clock_rng_(config.seed, path_index, Substream::switch_clock, salt),
      jump_source_(jumps_, RandomStream(config.seed, path_index, Substream::jump_times, salt),
                   RandomStream(config.seed, path_index, Substream::jump_marks, salt)),
      x_(x0),
      k_(k0) {
  if (!model.jumps.finite() && model.jumps.has_compensated_part())
    compensated_ = model.jumps.restricted(*config.truncation, 1.0);
  for (double c : checkpoints) {
    if (c < 0.0 || c > config.horizon + 1e-12) throw std::invalid_argument("checkpoint outside [0, T]");
    checkpoints_.push_back(snap_to_grid(c, config.dt, config.horizon));
  }
  std::sort(checkpoints_.begin(), checkpoints_.end());
}

int RegimeIntegrator::consume_checkpoint(double t) {
  if (next_checkpoint_ < checkpoints_.size() && checkpoints_[next_checkpoint_] == t)
    return static_cast<int>(next_checkpoint_++);
  return -1;
}

int RegimeIntegrator::checkpoint_at(double t) const {
  for (std::size_t i = 0; i < checkpoints_.size(); ++i)
    if (checkpoints_[i] == t) return static_cast<int>(i);
  return -1;
}

void RegimeIntegrator::ensure_cell() {
  if (cell_ready_ && t_ < cell_.hi()) return;
  if (cell_ready_) ++cell_index_;
  const double dt = config_.dt, horizon = config_.horizon;
  const double lo = cell_index_ == 0 ? 0.0 : static_cast<double>(cell_index_) * dt;
  double hi = static_cast<double>(cell_index_ + 1) * dt;
  if (hi > horizon || horizon - hi < 1e-9 * dt) hi = horizon;
  Point inc(model_.dimension);
  const double sd = std::sqrt(hi - lo);
  for (Eigen::Index i = 0; i < inc.size(); ++i) inc(i) = sd * brownian_rng_.normal();
  cell_.reset(lo, hi, inc);
  cell_ready_ = true;
}

Point RegimeIntegrator::compensated_drift(const Point& x, Regime k) const {
  Point b = model_.eval_drift(x, k);
  if (compensated_) {
    IntegrationBudget quad;
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b(i) -= compensated_->integrate([&](const Mark& u) { return model_.eval_jump(x, k, u)(i); }, quad, nullptr).value;
  }
  return b;
}

bool RegimeIntegrator::guard_ok(const Point& x) const {
  return x.allFinite() && x.norm() <= config_.explosion_radius;
}

RegimeIntegrator::Outcome RegimeIntegrator::run_segment(const SegmentRule& rule, PathObserver& observer) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const bool clocked = rule.kind == SegmentRule::Kind::clock && !model_.rates.is_zero();
  double q_cur = clocked ? total_rate(model_, x_, k_) : 0.0;
  double clock = 0.0;
  double candidate = rule.kind == SegmentRule::Kind::thinning ? rule.first_candidate : inf;
  const double fixed = rule.kind == SegmentRule::Kind::fixed_time ? rule.threshold : inf;
  if (fixed <= t_) return {true, t_};

  while (t_ < config_.horizon && status_ == PathStatus::completed) {
    ensure_cell();
    double t_next = std::min({cell_.hi(), jump_source_.next_time(), candidate, fixed});
    if (next_checkpoint_ < checkpoints_.size()) t_next = std::min(t_next, checkpoints_[next_checkpoint_]);
    const double h = t_next - t_;
    const Point w0 = cell_.at(t_, bridge_rng_);
    const Point dw = cell_.at(t_next, bridge_rng_) - w0;
    const Point b = compensated_drift(x_, k_);
    const Matrix s = model_.eval_diffusion(x_, k_);
    const Point x_new = x_ + b * h + s * dw;

    if (clocked) {
      const double q_new = guard_ok(x_new) ? total_rate(model_, x_new, k_) : q_cur;
      const double increment = 0.5 * (q_cur + q_new) * h;
      if (clock + increment > rule.threshold) {
        // linear interpolation of the integrated clock inside the step
        const double theta = std::clamp((rule.threshold - clock) / increment, 0.0, 1.0);
        const double ts = t_ + theta * h;
        if (ts > t_) {
          const Point dws = cell_.at(ts, bridge_rng_) - w0;
          x_ = x_ + b * (ts - t_) + s * dws;
          t_ = ts;
        }
        if (!guard_ok(x_)) {
          status_ = PathStatus::exploded;
          return {false, t_};
        }
        return {true, t_};
      }
      clock += increment;
      q_cur = q_new;
    }
    if (!guard_ok(x_new)) {
      status_ = PathStatus::exploded;
      return {false, t_};
    }
    x_ = x_new;
    t_ = t_next;

    if (t_ == candidate) {
      const double q = total_rate(model_, x_, k_);
      if (q > rule.majorant * (1.0 + 1e-12))
        throw ModelError("thinning majorant H(k+1) = " + std::to_string(rule.majorant) + " exceeded by q_k(x) = " +
                         std::to_string(q) + " in regime " + std::to_string(k_));
      const bool accept = clock_rng_.uniform() * rule.majorant < q;
      candidate = t_ + clock_rng_.exponential() / rule.majorant;
      if (accept) return {true, t_};
    }
    if (t_ == fixed) return {true, t_};

    PathPoint p{t_, x_, k_, EventTag::grid, -1};
    if (t_ == jump_source_.next_time()) {
      const Mark u = jump_source_.take();
      const Point disp = model_.eval_jump(x_, k_, u);
      observer.on_jump({t_, u, disp, k_});
      x_ += disp;
      p.x = x_;
      p.tag = EventTag::jump;
      if (!guard_ok(x_)) {
        status_ = PathStatus::exploded;
        return {false, t_};
      }
      if (clocked) q_cur = total_rate(model_, x_, k_);
    }
    if (next_checkpoint_ < checkpoints_.size() && checkpoints_[next_checkpoint_] == t_) {
      p.checkpoint = static_cast<int>(next_checkpoint_++);
      if (p.tag == EventTag::grid && t_ != cell_.hi()) p.tag = EventTag::checkpoint;
    }
    observer.on_point(p);
  }
  return {false, t_};
}

// ---------------------------------------------------------------------------
// Interlacing
// ---------------------------------------------------------------------------

Regime sample_switch_target(const ModelSpec& model, const Point& x, Regime k, RandomStream& rng) {
  const SwitchPartition part = partition(model, x, k);
  if (!(part.total > 0.0)) return k;
  const double r = rng.uniform() * part.total;
  const int shift = h_eval(part, k, r);
  // r < total always lands in an interval; guard against round-off at the right end
  return shift != 0 ? k + shift : part.intervals.back().target;
}

SegmentResult simulate_regime_segment(const ModelSpec& model, const Point& x0, Regime k, double xi,
                                      const SimConfig& config, std::uint64_t path_index) {
  if (!(xi > 0.0)) throw std::invalid_argument("exponential threshold must be positive");
  config.check(x0, k);
  model.check();
  SegmentResult result;
  PathRecorder recorder(result.segment);
  recorder.on_point({0.0, x0, k, EventTag::start, -1});
  RegimeIntegrator integrator(model, config, path_index, x0, k);
  const auto outcome = integrator.run_segment(SegmentRule::clock(xi), recorder);
  result.switched = outcome.switched;
  if (outcome.switched) {
    result.switch_time = outcome.time;
    result.segment.points.push_back({outcome.time, integrator.state(), k, EventTag::switch_epoch, -1});
  }
  result.segment.status = integrator.status();
  return result;
}

PathStatus run_hybrid(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                      const PathOptions& options, PathObserver& observer) {
  config.check(x0, k0);
  model.check();
  RegimeIntegrator integrator(model, config, options.path_index, x0, k0, options.checkpoints, options.salt);
  RandomStream target_rng(config.seed, options.path_index, Substream::switch_target, options.salt);

  // checkpoints at 0 and at switch epochs are labelled here, the integrator labels the rest
  observer.on_point({0.0, x0, k0, EventTag::start, integrator.consume_checkpoint(0.0)});

  const bool switching = !options.freeze_regime && !model.rates.is_zero();
  while (!integrator.finished()) {
    SegmentRule rule = SegmentRule::never();
    if (switching) {
      if (config.clock == ClockScheme::grid_integrated) {
        rule = SegmentRule::clock(integrator.clock_stream().exponential());
      } else {
        if (!model.growth_bound) throw std::invalid_argument("thinning clock needs the model growth constant H");
        rule.kind = SegmentRule::Kind::thinning;
        rule.majorant = *model.growth_bound * (integrator.regime() + 1.0);
        rule.first_candidate = integrator.time() + integrator.clock_stream().exponential() / rule.majorant;
      }
    }
    const auto outcome = integrator.run_segment(rule, observer);
    if (!outcome.switched) break;
    const Regime from = integrator.regime();
    const Regime to = sample_switch_target(model, integrator.state(), from, target_rng);
    if (to == from) continue;
    if (to > config.regime_ceiling) {
      integrator.terminate(PathStatus::ceiling);
      break;
    }
    observer.on_switch({outcome.time, from, to, integrator.state()});
    integrator.set_regime(to);
    observer.on_point({outcome.time, integrator.state(), to, EventTag::switch_epoch,
                      integrator.consume_checkpoint(outcome.time)});
  }
  return integrator.status();
}

HybridPath simulate_hybrid(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                           const PathOptions& options) {
  HybridPath path;
  PathRecorder recorder(path);
  path.status = run_hybrid(model, x0, k0, config, options, recorder);
  if (path.status == PathStatus::exploded)
    path.diagnostic = "state left the ball of radius " + std::to_string(config.explosion_radius);
  else if (path.status == PathStatus::ceiling)
    path.diagnostic = "regime exceeded ceiling " + std::to_string(config.regime_ceiling);
  return path;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

std::vector<std::string> ensemble_functional_names(int dimension) {
  std::vector<std::string> names;
  for (int i = 0; i < dimension; ++i) names.push_back("x[" + std::to_string(i) + "]");
  names.emplace_back("|x|^2");
  names.emplace_back("lambda");
  names.emplace_back("lambda^2");
  return names;
}

std::vector<double> ensemble_functionals(const Point& x, Regime k) {
  std::vector<double> v(x.data(), x.data() + x.size());
  v.push_back(x.squaredNorm());
  v.push_back(static_cast<double>(k));
  v.push_back(static_cast<double>(k) * k);
  return v;
}

std::size_t EnsembleStats::functional_index(const std::string& name) const {
  for (std::size_t i = 0; i < functionals.size(); ++i)
    if (functionals[i] == name) return i;
  throw std::out_of_range("no ensemble functional " + name);
}

namespace {

struct PathSummary {
  PathStatus status = PathStatus::completed;
  std::vector<std::vector<double>> at_checkpoint;  // [checkpoint][functional]
  double sup_x_sq = 0.0;
  double sup_lambda_sq = 0.0;
  std::vector<double> average;
  HybridPath retained;
};

class BatchCollector : public PathObserver {
 public:
  BatchCollector(PathSummary& out, std::size_t checkpoints, std::size_t functionals, std::optional<double> avg_from,
                 double horizon)
      : out_(out), avg_from_(avg_from), horizon_(horizon) {
    out_.at_checkpoint.assign(checkpoints, std::vector<double>(functionals, 0.0));
    if (avg_from_) out_.average.assign(functionals, 0.0);
  }

  void on_point(const PathPoint& p) override {
    if (avg_from_ && have_prev_) {
      const double w = p.t - std::max(prev_t_, *avg_from_);
      if (w > 0.0)
        for (std::size_t i = 0; i < prev_values_.size(); ++i) out_.average[i] += w * prev_values_[i];
    }
    const auto values = ensemble_functionals(p.x, p.k);
    if (p.checkpoint >= 0) out_.at_checkpoint[static_cast<std::size_t>(p.checkpoint)] = values;
    out_.sup_x_sq = std::max(out_.sup_x_sq, p.x.squaredNorm());
    out_.sup_lambda_sq = std::max(out_.sup_lambda_sq, static_cast<double>(p.k) * p.k);
    prev_t_ = p.t;
    prev_values_ = values;
    have_prev_ = true;
  }

  void finish() {
    if (avg_from_) {
      const double span = horizon_ - *avg_from_;
      for (auto& a : out_.average) a /= span;
    }
  }

 private:
  PathSummary& out_;
  std::optional<double> avg_from_;
  double horizon_;
  bool have_prev_ = false;
  double prev_t_ = 0.0;
  std::vector<double> prev_values_;
};

}  // namespace

EnsembleStats simulate_batch(const ModelSpec& model, const Point& x0, Regime k0, const SimConfig& config,
                             const BatchOptions& options) {
  if (config.paths < 2) throw std::invalid_argument("simulate_batch needs at least two paths");
  config.check(x0, k0);
  model.check();
  std::vector<double> checkpoints = options.checkpoints.empty() ? std::vector<double>{config.horizon} : options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  if (options.average_from && !(*options.average_from >= 0.0 && *options.average_from < config.horizon))
    throw std::invalid_argument("average_from must lie in [0, T)");
  const auto names = ensemble_functional_names(model.dimension);

  std::vector<PathSummary> summaries(config.paths);
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    PathSummary& s = summaries[i];
    BatchCollector collector(s, checkpoints.size(), names.size(), options.average_from, config.horizon);
    ObserverList observers;
    observers.add(collector);
    std::optional<PathRecorder> recorder;
    if (i < options.retain_paths) {
      recorder.emplace(s.retained, std::max<std::size_t>(options.retain_stride, 1));
      observers.add(*recorder);
    }
    PathOptions po;
    po.checkpoints = checkpoints;
    po.path_index = i;
    po.freeze_regime = options.freeze_regime;
    s.status = run_hybrid(model, x0, k0, config, po, observers);
    s.retained.status = s.status;
    collector.finish();
  });

  EnsembleStats stats;
  stats.times = checkpoints;
  stats.functionals = names;
  const std::size_t nf = names.size(), nc = checkpoints.size();
  std::vector<std::vector<RunningMoments>> moments(nf, std::vector<RunningMoments>(nc));
  std::vector<RunningMoments> averages(options.average_from ? nf : 0);
  RunningMoments sup_x, sup_l;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    auto& s = summaries[i];
    if (i < options.retain_paths) stats.retained.push_back(std::move(s.retained));
    if (s.status == PathStatus::exploded) {
      ++stats.exploded;
      continue;
    }
    if (s.status == PathStatus::ceiling) {
      ++stats.ceiling;
      continue;
    }
    ++stats.completed;
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t c = 0; c < nc; ++c) moments[f][c].add(s.at_checkpoint[c][f]);
    for (std::size_t f = 0; f < averages.size(); ++f) averages[f].add(s.average[f]);
    sup_x.add(s.sup_x_sq);
    sup_l.add(s.sup_lambda_sq);
  }
  stats.mean.assign(nf, std::vector<double>(nc));
  stats.variance = stats.mean;
  stats.std_error = stats.mean;
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t c = 0; c < nc; ++c) {
      stats.mean[f][c] = moments[f][c].mean();
      stats.variance[f][c] = moments[f][c].variance();
      stats.std_error[f][c] = moments[f][c].std_error();
    }
  for (auto& a : averages) stats.time_average.push_back({a.mean(), a.std_error(), a.count()});
  stats.sup_x_sq = {sup_x.mean(), sup_x.std_error(), sup_x.count()};
  stats.sup_lambda_sq = {sup_l.mean(), sup_l.std_error(), sup_l.count()};
  return stats;
}

}  // namespace rsjd
