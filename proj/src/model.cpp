#include "rsjd/model.hpp"

#include "rsjd/quadrature.hpp"
#include "rsjd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rsjd {

// ---------------------------------------------------------------------------
// JumpMeasure
// ---------------------------------------------------------------------------

JumpMeasure JumpMeasure::none() { return JumpMeasure{}; }

JumpMeasure JumpMeasure::laplace(double total_mass, double scale, int mark_dim) {
  if (!(total_mass >= 0.0) || !(scale > 0.0)) throw ModelError("laplace jump measure: need mass >= 0 and scale > 0");
  JumpMeasure m;
  m.law_ = total_mass > 0.0 ? MarkLaw::laplace : MarkLaw::none;
  m.mass_ = total_mass;
  m.scale_ = scale;
  m.mark_dim_ = mark_dim;
  return m;
}

JumpMeasure JumpMeasure::normal(double total_mass, double mean, double sd, int mark_dim) {
  if (!(total_mass >= 0.0) || !(sd > 0.0)) throw ModelError("normal jump measure: need mass >= 0 and sd > 0");
  JumpMeasure m;
  m.law_ = total_mass > 0.0 ? MarkLaw::normal : MarkLaw::none;
  m.mass_ = total_mass;
  m.mean_ = mean;
  m.sd_ = sd;
  m.mark_dim_ = mark_dim;
  return m;
}

JumpMeasure JumpMeasure::uniform(double total_mass, double low, double high, int mark_dim) {
  if (!(total_mass >= 0.0) || !(high > low)) throw ModelError("uniform jump measure: need mass >= 0 and high > low");
  JumpMeasure m;
  m.law_ = total_mass > 0.0 ? MarkLaw::uniform : MarkLaw::none;
  m.mass_ = total_mass;
  m.low_ = low;
  m.high_ = high;
  m.mark_dim_ = mark_dim;
  return m;
}

JumpMeasure JumpMeasure::atoms(double total_mass, std::vector<Mark> values, std::vector<double> weights) {
  if (values.empty() || values.size() != weights.size()) throw ModelError("atom jump measure: values/weights mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ModelError("atom jump measure: negative weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw ModelError("atom jump measure: weights sum to zero");
  JumpMeasure m;
  m.law_ = total_mass > 0.0 ? MarkLaw::atoms : MarkLaw::none;
  m.mass_ = total_mass;
  m.mark_dim_ = static_cast<int>(values.front().size());
  for (auto& w : weights) w /= sum;
  m.atom_values_ = std::move(values);
  m.atom_weights_ = std::move(weights);
  return m;
}

JumpMeasure JumpMeasure::symmetric_power(double intensity, double index, double upper, double lower) {
  if (!(intensity > 0.0) || !(index > 0.0 && index < 2.0) || !(upper > lower) || lower < 0.0)
    throw ModelError("symmetric power jump measure: need intensity > 0, index in (0,2), 0 <= lower < upper");
  JumpMeasure m;
  m.law_ = MarkLaw::symmetric_power;
  m.intensity_ = intensity;
  m.index_ = index;
  m.upper_ = upper;
  m.lower_ = lower;
  m.mark_dim_ = 1;
  return m;
}

bool JumpMeasure::finite() const { return law_ != MarkLaw::symmetric_power || lower_ > 0.0; }

double JumpMeasure::total_mass() const {
  switch (law_) {
    case MarkLaw::none:
      return 0.0;
    case MarkLaw::symmetric_power:
      if (lower_ <= 0.0) return std::numeric_limits<double>::infinity();
      return 2.0 * intensity_ * (std::pow(lower_, -index_) - std::pow(upper_, -index_)) / index_;
    default:
      return mass_;
  }
}

JumpMeasure JumpMeasure::truncated(double level) const {
  if (law_ != MarkLaw::symmetric_power) return *this;
  if (!(level > 0.0)) throw ModelError("truncation level must be positive");
  return restricted(level, upper_);
}

JumpMeasure JumpMeasure::restricted(double lo, double hi) const {
  if (law_ != MarkLaw::symmetric_power) throw UnsupportedModel("restricted(): only the symmetric power law supports restriction");
  JumpMeasure m = *this;
  m.lower_ = std::max(lower_, lo);
  m.upper_ = std::min(upper_, hi);
  if (!(m.upper_ > m.lower_)) {
    m.law_ = MarkLaw::none;
    m.mass_ = 0.0;
  }
  return m;
}

Mark JumpMeasure::sample(RandomStream& rng) const {
  Mark u = Mark::Zero(mark_dim_);
  switch (law_) {
    case MarkLaw::none:
      break;
    case MarkLaw::laplace:
      for (int i = 0; i < mark_dim_; ++i) {
        const double mag = scale_ * rng.exponential();
        u(i) = rng.uniform() < 0.5 ? -mag : mag;
      }
      break;
    case MarkLaw::normal:
      for (int i = 0; i < mark_dim_; ++i) u(i) = mean_ + sd_ * rng.normal();
      break;
    case MarkLaw::uniform:
      for (int i = 0; i < mark_dim_; ++i) u(i) = low_ + (high_ - low_) * rng.uniform();
      break;
    case MarkLaw::atoms: {
      double v = rng.uniform();
      std::size_t idx = 0;
      for (; idx + 1 < atom_weights_.size(); ++idx) {
        if (v < atom_weights_[idx]) break;
        v -= atom_weights_[idx];
      }
      u = atom_values_[idx];
      break;
    }
    case MarkLaw::symmetric_power: {
      if (!finite()) throw ModelError("cannot sample an infinite jump measure; truncate it first");
      const double a = index_;
      const double lo = std::pow(lower_, -a), hi = std::pow(upper_, -a);
      const double mag = std::pow(lo - rng.uniform() * (lo - hi), -1.0 / a);
      u(0) = rng.uniform() < 0.5 ? -mag : mag;
      break;
    }
  }
  return u;
}

bool JumpMeasure::has_quadrature() const {
  if (law_ == MarkLaw::none || law_ == MarkLaw::atoms) return true;
  return mark_dim_ == 1;
}

MarkIntegral JumpMeasure::integrate(const std::function<double(const Mark&)>& g, const IntegrationBudget& budget,
                                    RandomStream* rng) const {
  MarkIntegral out;
  if (law_ == MarkLaw::none) {
    out.quadrature = true;
    return out;
  }
  Mark u = Mark::Zero(mark_dim_);
  if (law_ == MarkLaw::atoms) {
    double sum = 0.0;
    for (std::size_t i = 0; i < atom_values_.size(); ++i) sum += atom_weights_[i] * g(atom_values_[i]);
    out.value = mass_ * sum;
    out.quadrature = true;
    return out;
  }
  if (budget.prefer_quadrature && has_quadrature()) {
    const int n = budget.quadrature_nodes;
    double sum = 0.0;
    switch (law_) {
      case MarkLaw::laplace: {
        const auto& rule = gauss_laguerre(n);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          u(0) = scale_ * rule.nodes[i];
          const double plus = g(u);
          u(0) = -scale_ * rule.nodes[i];
          sum += 0.5 * rule.weights[i] * (plus + g(u));
        }
        out.value = mass_ * sum;
        break;
      }
      case MarkLaw::normal: {
        const auto& rule = gauss_hermite_probabilist(n);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          u(0) = mean_ + sd_ * rule.nodes[i];
          sum += rule.weights[i] * g(u);
        }
        out.value = mass_ * sum;
        break;
      }
      case MarkLaw::uniform: {
        const auto& rule = gauss_legendre(n);
        const double mid = 0.5 * (low_ + high_), half = 0.5 * (high_ - low_);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          u(0) = mid + half * rule.nodes[i];
          sum += 0.5 * rule.weights[i] * g(u);
        }
        out.value = mass_ * sum;
        break;
      }
      case MarkLaw::symmetric_power: {
        // s = log|z|: intensity * int [g(e^s) + g(-e^s)] e^{-a s} ds, in panels of width <= 1
        const double s_lo = std::log(std::max(lower_, 1e-14)), s_hi = std::log(upper_);
        const int panels = std::max(1, static_cast<int>(std::ceil(s_hi - s_lo)));
        const auto& rule = gauss_legendre(16);
        const double width = (s_hi - s_lo) / panels;
        for (int p = 0; p < panels; ++p) {
          const double mid = s_lo + (p + 0.5) * width;
          for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double s = mid + 0.5 * width * rule.nodes[i];
            const double z = std::exp(s);
            u(0) = z;
            const double plus = g(u);
            u(0) = -z;
            sum += 0.5 * width * rule.weights[i] * (plus + g(u)) * std::exp(-index_ * s);
          }
        }
        out.value = intensity_ * sum;
        break;
      }
      default:
        break;
    }
    out.quadrature = true;
    return out;
  }
  if (!finite()) throw UnsupportedModel("Monte Carlo integration needs a finite jump measure");
  if (rng == nullptr) throw std::invalid_argument("JumpMeasure::integrate: Monte Carlo needs a random stream");
  const std::size_t n = std::max<std::size_t>(budget.samples, 2);
  RunningMoments m;
  for (std::size_t i = 0; i < n; ++i) m.add(g(sample(*rng)));
  const double mass = total_mass();
  out.value = mass * m.mean();
  if (budget.samples < budget.minimum_samples) {
    out.flagged = true;
    out.std_error = mass * std::sqrt(m.variance());
  } else {
    out.std_error = mass * m.std_error();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

RateMatrix RateMatrix::zero() { return RateMatrix{}; }

namespace {

std::string describe(const Point& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

template <typename Fn>
void for_each_band_target(const ModelSpec& model, Regime k, Fn&& fn) {
  const RateMatrix& r = model.rates;
  if (r.is_zero()) return;
  const Regime lo = std::max(0, k - r.band);
  Regime hi = k + r.band;
  if (r.max_regime) hi = std::min(hi, *r.max_regime);
  for (Regime l = lo; l <= hi; ++l)
    if (l != k) fn(l);
}

double checked_rate(const ModelSpec& model, const Point& x, Regime k, Regime l) {
  const double q = model.rates.rate(x, k, l);
  if (!std::isfinite(q) || q < 0.0) {
    std::ostringstream os;
    os << "invalid switching rate q(" << k << "," << l << ") = " << q << " at x = " << describe(x);
    throw ModelError(os.str());
  }
  return q;
}

}  // namespace

RateRow q_row(const ModelSpec& model, const Point& x, Regime k) {
  RateRow row;
  for_each_band_target(model, k, [&](Regime l) {
    const double q = checked_rate(model, x, k, l);
    if (q > 0.0) {
      row.entries.push_back({l, q});
      row.total += q;
    }
  });
  return row;
}

double total_rate(const ModelSpec& model, const Point& x, Regime k) {
  double total = 0.0;
  for_each_band_target(model, k, [&](Regime l) { total += checked_rate(model, x, k, l); });
  return total;
}

SwitchPartition partition(const ModelSpec& model, const Point& x, Regime k) {
  SwitchPartition part;
  const RateRow row = q_row(model, x, k);
  double cursor = 0.0;
  for (const auto& e : row.entries) {
    part.intervals.push_back({e.target, cursor, cursor + e.rate});
    cursor += e.rate;
  }
  part.total = row.total;
  return part;
}

int h_eval(const SwitchPartition& part, Regime k, double r) {
  for (const auto& iv : part.intervals)
    if (r >= iv.lo && r < iv.hi) return iv.target - k;
  return 0;
}

int h_eval(const ModelSpec& model, const Point& x, Regime k, double r) { return h_eval(partition(model, x, k), k, r); }

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

void ModelSpec::check() const {
  if (dimension < 1 || dimension > kMaxDim) throw ModelError("model dimension must lie in [1, 8]");
  if (!drift) throw ModelError("model has no drift");
  if (!diffusion) throw ModelError("model has no diffusion");
  if (jumps.law() != MarkLaw::none && !jump) throw ModelError("model has a jump measure but no jump coefficient");
  if (!rates.is_zero() && rates.band < 1) throw ModelError("rate band must be a positive integer");
  if (holder_exponent && !(*holder_exponent > 0.0 && *holder_exponent <= 1.0))
    throw ModelError("Hölder exponent must lie in (0, 1]");
  if (growth_bound && !(*growth_bound > 0.0)) throw ModelError("growth constant H must be positive");
}

Point ModelSpec::eval_drift(const Point& x, Regime k) const { return drift(x, k); }

Matrix ModelSpec::eval_diffusion(const Point& x, Regime k) const { return diffusion(x, k); }

Point ModelSpec::eval_jump(const Point& x, Regime k, const Mark& u) const {
  if (!jump) return Point::Zero(dimension);
  return jump(x, k, u);
}

// ---------------------------------------------------------------------------
// Assumption probing
// ---------------------------------------------------------------------------

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    default:
      return "unknown";
  }
}

bool AssumptionReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::pass; });
}

const AssumptionCheck& AssumptionReport::get(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no assumption check named " + name);
}

namespace {

struct Tracker {
  AssumptionCheck check;
  void observe(double ratio, const ProbePoint& at, const std::optional<Point>& partner = std::nullopt) {
    ++check.probes;
    const double r = std::isnan(ratio) ? std::numeric_limits<double>::infinity() : ratio;
    if (check.probes == 1 || r > check.worst_ratio) {
      check.worst_ratio = r;
      check.witness = at;
      check.witness_partner = partner;
    }
  }
  AssumptionCheck finish(bool constant_known, double tolerance) {
    if (!constant_known) {
      check.status = CheckStatus::unknown;
      check.note = "constant not supplied; worst ratio reported against 1";
      check.witness.reset();
      check.witness_partner.reset();
    } else if (check.worst_ratio <= 1.0 + tolerance) {
      check.status = CheckStatus::pass;
      check.note = "pass at " + std::to_string(check.probes) + " probes";
      check.witness.reset();
      check.witness_partner.reset();
    } else {
      check.status = CheckStatus::fail;
      check.note = "bound exceeded at witness";
    }
    return check;
  }
};

double rate_difference_l1(const ModelSpec& model, const Point& x, const Point& y, Regime k) {
  double sum = 0.0;
  for_each_band_target(model, k, [&](Regime l) {
    sum += std::abs(checked_rate(model, x, k, l) - checked_rate(model, y, k, l));
  });
  return sum;
}

}  // namespace

AssumptionReport validate_assumptions(const ModelSpec& model, const std::vector<ProbePoint>& probes,
                                      const ProbeOptions& options) {
  if (probes.empty()) throw std::invalid_argument("validate_assumptions: probes must be non-empty");
  model.check();
  const bool have_h = model.growth_bound.has_value();
  const double h = model.growth_bound.value_or(1.0);
  const bool have_delta = model.holder_exponent.has_value();
  const double delta = model.holder_exponent.value_or(1.0);

  Tracker nonneg{{"rates-nonnegative"}}, growth{{"linear-growth"}}, lipschitz{{"lipschitz"}},
      rate_bound{{"rate-bound"}}, holder{{"rate-holder"}}, jump_l1{{"jump-l1-lipschitz"}},
      rate_lip{{"rate-lipschitz"}};
  bool negative_rate = false;

  const JumpMeasure& pi = model.jumps;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const ProbePoint& probe = probes[p];
    const Point& x = probe.x;
    const Regime k = probe.k;
    RandomStream marks(options.seed, p, Substream::generator_marks);
    RandomStream dirs(options.seed, p, Substream::probes);

    double qk = 0.0;
    try {
      qk = total_rate(model, x, k);
      nonneg.observe(0.0, probe);
    } catch (const ModelError&) {
      negative_rate = true;
      nonneg.observe(std::numeric_limits<double>::infinity(), probe);
      continue;
    }

    const Point b = model.eval_drift(x, k);
    const Matrix s = model.eval_diffusion(x, k);
    const double jump_sq =
        pi.integrate([&](const Mark& u) { return model.eval_jump(x, k, u).squaredNorm(); }, options.budget, &marks)
            .value;
    growth.observe((b.squaredNorm() + frobenius_sq(s) + jump_sq) / (h * (1.0 + x.squaredNorm())), probe);
    rate_bound.observe(qk / (h * (k + 1.0)), probe);

    for (double dist : options.pair_distances) {
      Point dir(x.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dirs.normal();
      dir /= dir.norm();
      for (double sign : {1.0, -1.0}) {
        const Point y = x + sign * dist * dir;
        const double gap = (x - y).norm();
        if (!(gap > 0.0)) continue;
        const Point by = model.eval_drift(y, k);
        const Matrix sy = model.eval_diffusion(y, k);
        const double jd2 =
            pi.integrate([&](const Mark& u) { return (model.eval_jump(x, k, u) - model.eval_jump(y, k, u)).squaredNorm(); },
                         options.budget, &marks)
                .value;
        const double jd1 =
            pi.integrate([&](const Mark& u) { return (model.eval_jump(x, k, u) - model.eval_jump(y, k, u)).norm(); },
                         options.budget, &marks)
                .value;
        lipschitz.observe(((b - by).squaredNorm() + frobenius_sq(s - sy) + jd2) / (h * gap * gap), probe, y);
        jump_l1.observe(jd1 / (h * gap), probe, y);
        double rd = 0.0;
        try {
          rd = rate_difference_l1(model, x, y, k);
        } catch (const ModelError&) {
          negative_rate = true;
          nonneg.observe(std::numeric_limits<double>::infinity(), {y, k});
          continue;
        }
        holder.observe(rd / (h * std::pow(gap, delta)), probe, y);
        rate_lip.observe(rd / (h * gap), probe, y);
      }
    }
  }

  AssumptionReport report;
  report.probe_count = probes.size();
  {
    AssumptionCheck c = nonneg.check;
    c.status = negative_rate ? CheckStatus::fail : CheckStatus::pass;
    c.note = negative_rate ? "negative or non-finite rate at witness" : "pass at " + std::to_string(c.probes) + " probes";
    if (!negative_rate) c.witness.reset();
    report.checks.push_back(c);
  }
  report.checks.push_back(growth.finish(have_h, options.tolerance));
  report.checks.push_back(lipschitz.finish(have_h, options.tolerance));
  report.checks.push_back(rate_bound.finish(have_h, options.tolerance));
  report.checks.push_back(holder.finish(have_h && have_delta, options.tolerance));
  report.checks.push_back(jump_l1.finish(have_h, options.tolerance));
  report.checks.push_back(rate_lip.finish(have_h, options.tolerance));
  AssumptionCheck band{"band"};
  band.status = CheckStatus::pass;
  band.probes = probes.size();
  band.note = model.rates.is_zero() ? "no switching" : "rates are only defined within |l-k| <= " + std::to_string(model.rates.band);
  report.checks.push_back(band);
  return report;
}

}  // namespace rsjd
