#include "rsjd/ergodicity.hpp"

#include "rsjd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rsjd {

std::string DriftCertificate::status() const {
  if (passed()) return "pass at " + std::to_string(samples.size()) + " samples";
  std::string s = "fail (" + std::to_string(violations.size()) + " violations";
  if (unknown > 0) s += ", " + std::to_string(unknown) + " unknown";
  return s + ")";
}

std::vector<ProbePoint> sample_region(int dimension, double radius, Regime max_regime, std::size_t count,
                                      std::uint64_t seed) {
  if (!(radius > 0.0) || max_regime < 0) throw std::invalid_argument("region needs radius > 0 and max_regime >= 0");
  std::vector<ProbePoint> out;
  out.reserve(count);
  RandomStream rng(seed, 0, Substream::probes);
  for (std::size_t i = 0; i < count; ++i) {
    ProbePoint p;
    p.x = Point(dimension);
    for (int j = 0; j < dimension; ++j) p.x(j) = radius * (2.0 * rng.uniform() - 1.0);
    p.k = static_cast<Regime>(rng.below(static_cast<std::uint64_t>(max_regime) + 1));
    out.push_back(p);
  }
  return out;
}

std::vector<DriftSample> drift_samples(const ModelSpec& model, const TestFunction& v,
                                       const std::vector<ProbePoint>& points, const GeneratorOptions& options,
                                       std::uint64_t seed) {
  std::vector<DriftSample> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    RandomStream marks(seed, i, Substream::generator_marks);
    DriftSample& s = out[i];
    s.x = points[i].x;
    s.k = points[i].k;
    s.v = v(s.x, s.k);
    const GeneratorValue g = apply_generator(model, v, s.x, s.k, options, &marks);
    s.av = g.total;
    s.jump_se = g.jump_std_error;
    s.unknown = g.flagged || !std::isfinite(g.total);
  }
  return out;
}

DriftCertificate check_drift(const ModelSpec& model, const TestFunction& v, const std::vector<ProbePoint>& points,
                             double alpha, double gamma, double tolerance, const GeneratorOptions& options,
                             std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("drift check needs sample points");
  if (!(alpha > 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("drift check needs alpha > 0 and gamma >= 0");
  DriftCertificate c;
  c.lyapunov = v.name;
  c.alpha = alpha;
  c.gamma = gamma;
  c.tolerance = tolerance;
  c.region = std::to_string(points.size()) + " sample points";
  c.samples = drift_samples(model, v, points, options, seed);
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    const auto& s = c.samples[i];
    if (s.v < 0.0) throw std::invalid_argument("Lyapunov function is negative at a sample point");
    if (s.unknown) {
      ++c.unknown;
      continue;
    }
    if (s.av + alpha * s.v - gamma > tolerance + 3.0 * s.jump_se) c.violations.push_back(i);
  }
  return c;
}

DriftFit fit_drift(const std::vector<DriftSample>& samples, const DriftFitOptions& options) {
  if (samples.size() < 10) throw std::invalid_argument("fit_drift needs at least 10 samples");
  if (!(options.alpha_min > 0.0) || !(options.alpha_max > options.alpha_min) || options.grid_points < 2)
    throw std::invalid_argument("fit_drift needs 0 < alpha_min < alpha_max and two grid points");
  DriftFit fit;
  const double ratio = std::log(options.alpha_max / options.alpha_min) / static_cast<double>(options.grid_points - 1);
  for (std::size_t i = 0; i < options.grid_points; ++i) {
    const double a = options.alpha_min * std::exp(ratio * static_cast<double>(i));
    double g = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
      if (s.unknown) continue;
      g = std::max(g, s.av + a * s.v);
    }
    fit.alpha_grid.push_back(a);
    fit.gamma_grid.push_back(g);
    if (g <= options.gamma_cap) {
      fit.certified = true;
      fit.alpha = a;
      fit.gamma = std::max(g, 0.0);
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Linearized conditions
// ---------------------------------------------------------------------------

double mu_i(const LinearizedSpec& spec, Regime i) {
  if (i < 0 || static_cast<std::size_t>(i) >= spec.regimes.size())
    throw TruncationError("regime " + std::to_string(i) + " is outside the linearized truncation");
  const auto& r = spec.regimes[static_cast<std::size_t>(i)];
  Matrix s = 0.5 * (r.b + r.b.transpose());
  for (const auto& sj : r.sigma) s += sj * sj.transpose();
  if (!s.allFinite() || !std::isfinite(r.c_hat)) throw std::invalid_argument("non-finite linearized coefficient");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() + r.c_hat;
}

namespace {

std::vector<Point> directions(int d, std::size_t count, std::uint64_t seed) {
  std::vector<Point> out;
  if (d == 1) return {make_point({1.0}), make_point({-1.0})};
  RandomStream rng(seed, 0, Substream::probes, 17);
  for (std::size_t i = 0; i < count; ++i) {
    Point u(d);
    for (int j = 0; j < d; ++j) u(j) = rng.normal();
    out.push_back(u / u.norm());
  }
  return out;
}

double rate_or_zero(const ModelSpec& model, const Point& x, Regime k, Regime l) {
  if (model.rates.is_zero() || l < 0 || l == k || std::abs(l - k) > model.rates.band) return 0.0;
  if (model.rates.max_regime && (k > *model.rates.max_regime || l > *model.rates.max_regime)) return 0.0;
  const double q = model.rates.rate(x, k, l);
  if (!(q >= 0.0) || !std::isfinite(q)) throw ModelError("invalid rate q(" + std::to_string(k) + "," + std::to_string(l) + ")");
  return q;
}

}  // namespace

TailConstant jump_tail_constant(const ModelSpec& model, Regime i, double p, double radius,
                                const IntegrationBudget& budget, std::size_t count, std::uint64_t seed) {
  if (!(p > 0.0 && p < 2.0)) throw std::invalid_argument("p must lie in (0, 2)");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (!model.jumps.finite()) throw UnsupportedModel("jump tail constant needs a finite jump measure");
  TailConstant best{-std::numeric_limits<double>::infinity(), 0.0, false};
  if (model.jumps.law() == MarkLaw::none) return {0.0, 0.0, false};
  std::size_t di = 0;
  for (const Point& u : directions(model.dimension, count, seed)) {
    const Point x = radius * u;
    const double xp = std::pow(x.norm(), p);
    RandomStream rng(seed, di++, Substream::generator_marks);
    const MarkIntegral m = model.jumps.integrate(
        [&](const Mark& mark) { return std::pow((x + model.eval_jump(x, i, mark)).norm(), p) / xp - 1.0; }, budget,
        &rng);
    if (m.value > best.value) best = {m.value, m.std_error, m.flagged};
  }
  return best;
}

LinearizedSpec linearize_affine(const ModelSpec& model, Regime max_regime, double p, double alpha, RegimeFunction g,
                                double radius, const IntegrationBudget& budget) {
  if (!model.affine_regime) throw UnsupportedModel("model has no affine regimes to linearize");
  LinearizedSpec spec;
  spec.p = p;
  spec.alpha = alpha;
  spec.g = std::move(g);
  spec.radius = radius;
  for (Regime i = 0; i <= max_regime; ++i) {
    const auto a = model.affine_regime(i);
    if (!a) throw UnsupportedModel("regime " + std::to_string(i) + " is not affine");
    LinearizedRegime r;
    r.b = a->drift_matrix;
    // additive noise: sigma(x) / |x| -> 0, so every sigma_j vanishes at infinity
    r.sigma.assign(static_cast<std::size_t>(model.dimension), Matrix::Zero(model.dimension, model.dimension));
    r.c_hat = jump_tail_constant(model, i, p, radius, budget).value;
    spec.regimes.push_back(r);
  }
  return spec;
}

LinearizedResult check_linearized(const LinearizedSpec& spec, const ModelSpec& model, std::size_t count,
                                  std::uint64_t seed) {
  if (!(spec.p > 0.0 && spec.p < 2.0)) throw std::invalid_argument("p must lie in (0, 2)");
  if (spec.regimes.empty()) throw std::invalid_argument("linearized spec has no regimes");
  const Regime m = static_cast<Regime>(spec.regimes.size()) - 1;
  const int band = model.rates.is_zero() ? 0 : model.rates.band;
  if (!model.rates.is_zero() && model.rates.max_regime && *model.rates.max_regime < m)
    throw TruncationError("truncation M = " + std::to_string(m) + " exceeds the model's max_regime");
  // regimes past the model's max_regime are unreachable and need no weight
  Regime reach = m + band;
  if (!model.rates.is_zero() && model.rates.max_regime) reach = std::min(reach, *model.rates.max_regime);
  if (auto last = spec.g.last_regime(); last && *last < reach)
    throw TruncationError("weights g_i cover regimes up to " + std::to_string(*last) + " but the band around M = " +
                          std::to_string(m) + " reaches " + std::to_string(reach));
  for (Regime i = 0; i <= reach; ++i)
    if (!(spec.g(i) > 0.0)) throw std::invalid_argument("weights g_i must be positive");

  LinearizedResult out;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  const auto dirs = directions(model.dimension, count, seed);
  for (Regime i = 0; i <= m; ++i) {
    const double mu = mu_i(spec, i);
    double worst_r = -std::numeric_limits<double>::infinity(), worst_2r = worst_r;
    for (double scale : {1.0, 2.0}) {
      for (const Point& u : dirs) {
        const Point x = scale * spec.radius * u;
        double margin = spec.p * (spec.alpha + mu) * spec.g(i);
        for (Regime j = std::max(0, i - band); j <= std::min(i + band, reach); ++j)
          if (j != i) margin += rate_or_zero(model, x, i, j) * (spec.g(j) - spec.g(i));
        double& w = scale == 1.0 ? worst_r : worst_2r;
        w = std::max(w, margin);
        if (margin > out.worst_margin) {
          out.worst_margin = margin;
          out.witness = ProbePoint{x, i};
        }
      }
    }
    out.regime_margins.push_back(worst_r);
    out.regime_margins_2r.push_back(worst_2r);
    if ((worst_r > 0.0) != (worst_2r > 0.0)) out.radius_consistent = false;
  }
  out.passed = out.worst_margin <= 0.0 && out.radius_consistent;
  if (out.passed) out.witness.reset();
  return out;
}

// ---------------------------------------------------------------------------
// OU example
// ---------------------------------------------------------------------------

double jump_second_moment(const JumpMeasure& pi) {
  if (pi.law() == MarkLaw::none) return 0.0;
  if (!pi.finite()) throw UnsupportedModel("second moment of a sigma-finite jump measure");
  IntegrationBudget quad;
  quad.quadrature_nodes = 64;
  RandomStream rng(1, 0, Substream::generator_marks);
  return pi.integrate([](const Mark& u) { return u.squaredNorm(); }, quad, &rng).value;
}

double ou_example_k2(const CoupledOuParams& p, double jump_constant, Regime max_regime) {
  double k2 = 0.0;
  for (Regime k = 0; k <= max_regime; ++k) {
    const double s = p.sigma(k), b = p.beta(k);
    k2 = std::max(k2, (k + 1.0) * s * s + jump_constant * (k + 1.0) * b * b);
  }
  return k2;
}

OuConditions ou_example_conditions(const CoupledOuParams& params, double k1, double k2, double jump_constant,
                                   const std::vector<Point>& probes, Regime max_regime) {
  if (probes.empty()) throw std::invalid_argument("OU conditions need probe points");
  const ModelSpec model = make_coupled_ou(params);
  const double tol = 1e-12;
  OuConditions out;
  auto observe = [&](ConditionResult& c, double excess, const Point& x, Regime k) {
    if (excess > c.worst) {
      c.worst = excess;
      c.witness = ProbePoint{x, k};
    }
  };
  for (const Point& x : probes) {
    const double lhs = 2.0 * params.alpha(0) + rate_or_zero(model, x, 0, 1);
    observe(out.a, lhs + k1, x, 0);
  }
  for (Regime k = 0; k <= max_regime; ++k) {
    const double s = params.sigma(k), b = params.beta(k);
    const double excess = s > 0.0 ? (k + 1.0) * s * s + jump_constant * (k + 1.0) * b * b - k2
                                   : std::numeric_limits<double>::infinity();
    observe(out.b, excess, make_point({0.0}), k);
  }
  for (Regime k = 1; k <= max_regime; ++k)
    for (const Point& x : probes) {
      const double lhs = 2.0 * (k + 1.0) * params.alpha(k) - rate_or_zero(model, x, k, k - 1) +
                         rate_or_zero(model, x, k, k + 1);
      observe(out.c, lhs + k1 * (k + 1.0), x, k);
    }
  for (ConditionResult* c : {&out.a, &out.b, &out.c}) {
    c->passed = c->worst <= tol * std::max(1.0, k1 + k2);
    if (c->passed) c->witness.reset();
  }
  if (max_regime < 1) out.c.worst = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Empirical convergence
// ---------------------------------------------------------------------------

std::size_t BinSpec::total(int dimension) const {
  std::size_t n = 1;
  for (int i = 0; i < dimension; ++i) n *= static_cast<std::size_t>(count + 2);
  return n * static_cast<std::size_t>(max_regime + 2);
}

std::size_t BinSpec::index(const Point& x, Regime k) const {
  std::size_t idx = 0, stride = 1;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::size_t b;
    if (x(i) < lo)
      b = 0;
    else if (x(i) >= hi)
      b = static_cast<std::size_t>(count) + 1;
    else
      b = 1 + std::min(static_cast<std::size_t>((x(i) - lo) / (hi - lo) * count), static_cast<std::size_t>(count - 1));
    idx += b * stride;
    stride *= static_cast<std::size_t>(count + 2);
  }
  const std::size_t r = static_cast<std::size_t>(std::min(k, max_regime + 1));
  return idx + r * stride;
}

namespace {

constexpr std::uint64_t kReferenceSalt = 0x7265666572656e63ULL;

class CheckpointBins : public PathObserver {
 public:
  CheckpointBins(const BinSpec& bins, std::size_t n) : bins_(bins), index(n, 0), x_sq(n, 0.0), lambda(n, 0.0) {}
  void on_point(const PathPoint& p) override {
    if (p.checkpoint < 0) return;
    const auto c = static_cast<std::size_t>(p.checkpoint);
    index[c] = bins_.index(p.x, p.k);
    x_sq[c] = p.x.squaredNorm();
    lambda[c] = p.k;
  }
  const BinSpec& bins_;
  std::vector<std::size_t> index;
  std::vector<double> x_sq, lambda;
};

}  // namespace

ErgodicityReport empirical_convergence(const ModelSpec& model, const std::vector<ProbePoint>& starts,
                                       const SimConfig& config, const ConvergenceOptions& options) {
  if (options.checkpoints.empty()) throw std::invalid_argument("convergence needs at least one checkpoint");
  if (starts.empty()) throw std::invalid_argument("convergence needs at least one initial condition");
  if (options.bins.count < 1 || !(options.bins.hi > options.bins.lo)) throw std::invalid_argument("invalid bins");
  if (!(options.reference_horizon > options.reference_burn_in) || !(options.reference_spacing > 0.0))
    throw std::invalid_argument("reference run needs horizon > burn-in and spacing > 0");
  std::vector<double> cps = options.checkpoints;
  std::sort(cps.begin(), cps.end());
  if (cps.front() <= 0.0 || cps.back() > config.horizon + 1e-12)
    throw std::invalid_argument("checkpoints must lie in (0, T]");

  ErgodicityReport report;
  report.checkpoints = cps;
  report.certified = options.certified;
  const std::size_t nbins = options.bins.total(model.dimension);
  report.bins = nbins;

  // reference law: one long run, sampled on a regular grid after burn-in
  std::vector<double> ref_counts(nbins, 0.0);
  {
    SimConfig rc = config;
    rc.horizon = options.reference_horizon;
    rc.paths = 1;
    std::vector<double> sample_times;
    for (double s = options.reference_burn_in; s <= options.reference_horizon + 1e-9; s += options.reference_spacing)
      sample_times.push_back(std::min(s, options.reference_horizon));
    CheckpointBins obs(options.bins, sample_times.size());
    PathOptions po;
    po.checkpoints = sample_times;
    po.path_index = 0;
    po.salt = kReferenceSalt;
    if (run_hybrid(model, starts.front().x, starts.front().k, rc, po, obs) != PathStatus::completed)
      throw std::runtime_error("reference run did not complete (explosion or regime ceiling)");
    for (auto b : obs.index) ref_counts[b] += 1.0;
    report.reference_samples = sample_times.size();
  }
  for (double c : ref_counts)
    if (c > 0.0 && c < 5.0) ++report.undersampled_bins;

  const double ref_total = std::accumulate(ref_counts.begin(), ref_counts.end(), 0.0);
  double floor_sum = 0.0;
  for (double c : ref_counts) {
    const double p = c / ref_total;
    floor_sum += std::sqrt(p * (1.0 - p));
  }
  // E|p_hat - p| ~ sqrt(2 p (1 - p) / (pi n)) per bin
  report.noise_floor = 0.5 * std::sqrt(2.0 / (M_PI * static_cast<double>(config.paths))) * floor_sum;
  report.fit_floor = options.fit_floor ? *options.fit_floor : 3.0 * report.noise_floor;

  std::vector<std::vector<double>> final_counts;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    struct PerPath {
      bool ok = false;
      std::vector<std::size_t> index;
      std::vector<double> x_sq, lambda;
    };
    std::vector<PerPath> results(config.paths);
    parallel_for(config.paths, config.workers, [&](std::size_t i) {
      CheckpointBins obs(options.bins, cps.size());
      PathOptions po;
      po.checkpoints = cps;
      po.path_index = i;
      po.salt = s + 1;
      if (run_hybrid(model, starts[s].x, starts[s].k, config, po, obs) != PathStatus::completed) return;
      results[i] = {true, obs.index, obs.x_sq, obs.lambda};
    });
    ConvergenceSeries series;
    series.x0 = starts[s].x;
    series.k0 = starts[s].k;
    std::vector<std::vector<double>> counts(cps.size(), std::vector<double>(nbins, 0.0));
    std::vector<RunningMoments> xs(cps.size()), ls(cps.size());
    for (const auto& r : results) {
      if (!r.ok) {
        ++series.excluded;
        continue;
      }
      for (std::size_t c = 0; c < cps.size(); ++c) {
        counts[c][r.index[c]] += 1.0;
        xs[c].add(r.x_sq[c]);
        ls[c].add(r.lambda[c]);
      }
    }
    if (series.excluded == config.paths) throw std::runtime_error("every ensemble path was excluded");
    std::vector<double> ts, ys;
    for (std::size_t c = 0; c < cps.size(); ++c) {
      const double d = total_variation(counts[c], ref_counts);
      series.distance.push_back(d);
      series.mean_x_sq.push_back(xs[c].mean());
      series.mean_lambda.push_back(ls[c].mean());
      if (d > report.fit_floor) {
        ts.push_back(cps[c]);
        ys.push_back(std::log(d));
      }
    }
    series.fit_points = ts.size();
    if (ts.size() >= 2) series.fit = fit_line(ts, ys);
    final_counts.push_back(std::move(counts.back()));
    report.series.push_back(std::move(series));
  }
  for (std::size_t a = 0; a < final_counts.size(); ++a)
    for (std::size_t b = a + 1; b < final_counts.size(); ++b)
      report.start_spread = std::max(report.start_spread, total_variation(final_counts[a], final_counts[b]));
  return report;
}

}  // namespace rsjd
