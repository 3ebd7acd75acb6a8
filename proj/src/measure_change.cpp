#include "rsjd/measure_change.hpp"

#include "rsjd/parallel.hpp"

#include <cmath>
#include <limits>

namespace rsjd {

std::vector<Regime> AuxiliaryChainSpec::targets(Regime k) const {
  std::vector<Regime> out;
  if (k < kappa) {
    for (Regime l = 0; l <= 2 * kappa; ++l)
      if (l != k) out.push_back(l);
  } else {
    for (Regime l = k - kappa; l <= k + kappa; ++l)
      if (l != k) out.push_back(l);
  }
  return out;
}

double AuxiliaryChainSpec::rate(Regime k, Regime l) const {
  if (k == l) return -total_rate();
  for (Regime t : targets(k))
    if (t == l) return 1.0;
  return 0.0;
}

AuxiliaryChainSpec build_qhat(int kappa, int working_band) {
  if (kappa < 1) throw std::invalid_argument("kappa must be a positive integer");
  if (working_band < 0) throw std::invalid_argument("working band must be nonnegative");
  AuxiliaryChainSpec a;
  a.kappa = kappa;
  a.working_band = working_band;
  const std::size_t cols = static_cast<std::size_t>(std::max(working_band + kappa, 2 * kappa) + 1);
  for (Regime k = 0; k <= working_band; ++k) {
    std::vector<double> row(cols, 0.0);
    for (Regime l = 0; l < static_cast<Regime>(cols); ++l) row[static_cast<std::size_t>(l)] = a.rate(k, l);
    a.rows.push_back(std::move(row));
  }
  return a;
}

namespace {

double model_rate(const ModelSpec& model, const Point& x, Regime k, Regime l) {
  if (model.rates.is_zero() || l < 0 || std::abs(l - k) > model.rates.band) return 0.0;
  if (model.rates.max_regime && (l > *model.rates.max_regime || k > *model.rates.max_regime)) return 0.0;
  const double q = model.rates.rate(x, k, l);
  if (!(q >= 0.0) || !std::isfinite(q)) throw ModelError("rate q(" + std::to_string(k) + "," + std::to_string(l) + ") invalid");
  return q;
}

double model_total(const ModelSpec& model, const Point& x, Regime k) {
  if (model.rates.is_zero()) return 0.0;
  if (model.rates.max_regime && k > *model.rates.max_regime) return 0.0;
  return total_rate(model, x, k);
}

/// Accumulates log M_T from points and switch events in time order.
class WeightAccumulator : public PathObserver {
 public:
  WeightAccumulator(const ModelSpec& model, int kappa) : model_(model), kappa_(kappa) {}

  void on_point(const PathPoint& p) override {
    const double q = model_total(model_, p.x, p.k);
    if (have_prev_ && p.k == prev_k_) integral_ += 0.5 * (prev_q_ + q) * (p.t - prev_t_);
    prev_t_ = p.t;
    prev_q_ = q;
    prev_k_ = p.k;
    have_prev_ = true;
    last_t_ = p.t;
  }

  void on_switch(const SwitchEvent& s) override {
    if (have_prev_ && s.from == prev_k_) integral_ += 0.5 * (prev_q_ + model_total(model_, s.x, s.from)) * (s.t - prev_t_);
    have_prev_ = false;
    last_t_ = s.t;
    const double factor = model_rate(model_, s.x, s.from, s.to);
    log_factor_ += factor > 0.0 ? std::log(factor) : -std::numeric_limits<double>::infinity();
  }

  double log_weight() const { return log_factor_ - (integral_ - 2.0 * kappa_ * last_t_); }

 private:
  const ModelSpec& model_;
  int kappa_;
  bool have_prev_ = false;
  double prev_t_ = 0.0, prev_q_ = 0.0;
  Regime prev_k_ = 0;
  double integral_ = 0.0;
  double log_factor_ = 0.0;
  double last_t_ = 0.0;
};

class Terminal : public PathObserver {
 public:
  void on_point(const PathPoint& p) override { last = p; }
  PathPoint last;
};

void check_band(const ModelSpec& model, const AuxiliaryChainSpec& aux) {
  if (!model.rates.is_zero() && model.rates.band > aux.kappa)
    throw UnsupportedModel("model rate band " + std::to_string(model.rates.band) + " exceeds the auxiliary kappa " +
                           std::to_string(aux.kappa));
}

}  // namespace

WeightedPath simulate_auxiliary(const ModelSpec& model, const AuxiliaryChainSpec& aux, const Point& x0, Regime k0,
                                const SimConfig& config, const AuxiliaryOptions& options) {
  check_band(model, aux);
  if (!model.jumps.finite()) throw UnsupportedModel("change of measure needs a finite jump measure");
  config.check(x0, k0);
  model.check();

  WeightedPath out;
  WeightAccumulator weight(model, aux.kappa);
  Terminal terminal;
  PathRecorder recorder(out.path);
  ObserverList obs;
  obs.add(weight);
  obs.add(terminal);
  if (options.record) obs.add(recorder);

  RegimeIntegrator integrator(model, config, options.path_index, x0, k0);
  RandomStream chain(config.seed, options.path_index, Substream::auxiliary_chain, options.chain_salt);
  obs.on_point({0.0, x0, k0, EventTag::start, -1});
  while (!integrator.finished()) {
    const double epoch = integrator.time() + chain.exponential() / aux.total_rate();
    const auto outcome = integrator.run_segment(SegmentRule::fixed(epoch), obs);
    if (!outcome.switched) break;
    const auto targets = aux.targets(integrator.regime());
    const Regime to = targets[chain.below(static_cast<std::uint32_t>(targets.size()))];
    const Regime from = integrator.regime();
    obs.on_switch({outcome.time, from, to, integrator.state()});
    out.epochs.push_back(outcome.time);
    ++out.switches;
    if (model_rate(model, integrator.state(), from, to) == 0.0) {
      out.annihilated = true;  // M_T = 0 whatever happens next
      break;
    }
    if (to > config.regime_ceiling) {
      integrator.terminate(PathStatus::ceiling);
      break;
    }
    integrator.set_regime(to);
    obs.on_point({outcome.time, integrator.state(), to, EventTag::switch_epoch, -1});
  }
  out.status = integrator.status();
  out.path.status = out.status;
  out.terminal = integrator.state();
  out.terminal_regime = integrator.regime();
  out.log_weight = out.annihilated ? -std::numeric_limits<double>::infinity() : weight.log_weight();
  out.weight = std::exp(out.log_weight);
  return out;
}

double rn_weight(const ModelSpec& model, const AuxiliaryChainSpec& aux, const HybridPath& path, double horizon) {
  check_band(model, aux);
  WeightAccumulator w(model, aux.kappa);
  std::size_t next_switch = 0;
  for (const auto& p : path.points) {
    if (p.t > horizon) break;
    if (p.tag == EventTag::switch_epoch && next_switch < path.switches.size()) w.on_switch(path.switches[next_switch++]);
    w.on_point(p);
  }
  // a trailing switch without a post-switch point (annihilated path)
  while (next_switch < path.switches.size() && path.switches[next_switch].t <= horizon) w.on_switch(path.switches[next_switch++]);
  return std::exp(w.log_weight());
}

WeightedEstimate weighted_expectation(const ModelSpec& model, const AuxiliaryChainSpec& aux, const TestFunction& f,
                                      const Point& x0, Regime k0, const SimConfig& config, std::uint64_t chain_salt) {
  check_band(model, aux);
  struct Sample {
    bool ok = false;
    double weight = 0.0;
    double value = 0.0;
  };
  std::vector<Sample> samples(config.paths);
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    AuxiliaryOptions o;
    o.path_index = i;
    o.chain_salt = chain_salt;
    const WeightedPath w = simulate_auxiliary(model, aux, x0, k0, config, o);
    if (w.status != PathStatus::completed) return;
    samples[i] = {true, w.weight, w.weight > 0.0 ? f(w.terminal, w.terminal_regime) * w.weight : 0.0};
  });
  WeightedEstimate out;
  RunningMoments value, weight;
  for (const auto& s : samples) {
    if (!s.ok) {
      ++out.excluded;
      continue;
    }
    if (s.weight == 0.0) ++out.zero_weights;
    value.add(s.value);
    weight.add(s.weight);
  }
  out.estimate = {value.mean(), value.std_error(), value.count()};
  out.weight = {weight.mean(), weight.std_error(), weight.count()};
  out.degenerate = weight.count() == 0 || out.zero_weights == weight.count();
  if (!out.degenerate) {
    const double cv2 = weight.variance() / (weight.mean() * weight.mean());
    out.effective_sample_size = static_cast<double>(weight.count()) / (1.0 + cv2);
  }
  return out;
}

MeanEstimate direct_expectation(const ModelSpec& model, const TestFunction& f, const Point& x0, Regime k0,
                                const SimConfig& config, std::size_t* excluded) {
  config.check(x0, k0);
  std::vector<double> values(config.paths, std::numeric_limits<double>::quiet_NaN());
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    Terminal t;
    PathOptions po;
    po.path_index = i;
    if (run_hybrid(model, x0, k0, config, po, t) == PathStatus::completed) values[i] = f(t.last.x, t.last.k);
  });
  RunningMoments m;
  std::size_t bad = 0;
  for (double v : values) {
    if (std::isnan(v))
      ++bad;
    else
      m.add(v);
  }
  if (excluded) *excluded = bad;
  return {m.mean(), m.std_error(), m.count()};
}

}  // namespace rsjd
