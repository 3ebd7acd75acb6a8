#include "rsjd/generator.hpp"

#include "rsjd/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace rsjd {

namespace {

double fd_h(double step, double xi) { return step > 0.0 ? step : std::max(1e-5, 1e-5 * std::abs(xi)); }

}  // namespace

Point fd_gradient(const TestFunction& f, const Point& x, Regime k, double step) {
  Point g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_h(step, x(i));
    Point up = x, dn = x;
    up(i) += h;
    dn(i) -= h;
    g(i) = (f(up, k) - f(dn, k)) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const TestFunction& f, const Point& x, Regime k, double step) {
  const Eigen::Index d = x.size();
  Matrix hess(d, d);
  const double f0 = f(x, k);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double hi = fd_h(step, x(i));
    Point up = x, dn = x;
    up(i) += hi;
    dn(i) -= hi;
    hess(i, i) = (f(up, k) - 2.0 * f0 + f(dn, k)) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = fd_h(step, x(j));
      Point pp = x, pm = x, mp = x, mm = x;
      pp(i) += hi, pp(j) += hj;
      pm(i) += hi, pm(j) -= hj;
      mp(i) -= hi, mp(j) += hj;
      mm(i) -= hi, mm(j) -= hj;
      hess(i, j) = hess(j, i) = (f(pp, k) - f(pm, k) - f(mp, k) + f(mm, k)) / (4.0 * hi * hj);
    }
  }
  return hess;
}

GeneratorValue apply_generator(const ModelSpec& model, const TestFunction& f, const Point& x, Regime k,
                               const GeneratorOptions& options, RandomStream* rng) {
  if (!f.smooth) throw UnsupportedModel("generator needs a C^2 test function; '" + f.name + "' is not smooth");
  if (!model.jumps.finite()) throw UnsupportedModel("generator supports finite jump measures only");
  GeneratorValue v;
  const bool analytic = f.has_derivatives() && !options.finite_difference;
  const Point grad = analytic ? f.gradient(x, k) : fd_gradient(f, x, k, options.fd_step);
  const Matrix hess = analytic ? f.hessian(x, k) : fd_hessian(f, x, k, options.fd_step);
  const Point b = model.eval_drift(x, k);
  const Matrix s = model.eval_diffusion(x, k);
  const Matrix a = s * s.transpose();
  v.local = b.dot(grad) + 0.5 * (a.cwiseProduct(hess)).sum();

  const double fx = f(x, k);
  if (model.jumps.law() != MarkLaw::none) {
    const MarkIntegral j = model.jumps.integrate(
        [&](const Mark& u) { return f(Point(x + model.eval_jump(x, k, u)), k) - fx; }, options.budget, rng);
    v.jump = j.value;
    v.jump_std_error = j.std_error;
    v.jump_quadrature = j.quadrature;
    v.flagged = j.flagged;
  }
  if (!model.rates.is_zero()) {
    for (const auto& e : q_row(model, x, k).entries) v.switching += e.rate * (f(x, e.target) - fx);
  }
  v.total = v.local + v.jump + v.switching;
  return v;
}

// ---------------------------------------------------------------------------
// Dynkin residual
// ---------------------------------------------------------------------------

namespace {

class DynkinObserver : public PathObserver {
 public:
  DynkinObserver(const ModelSpec& model, const TestFunction& f, const GeneratorOptions& options, RandomStream* rng)
      : model_(model), f_(f), options_(options), rng_(rng) {}

  void on_point(const PathPoint& p) override {
    if (have_prev_) integral_ += prev_generator_ * (p.t - prev_t_);
    prev_generator_ = apply_generator(model_, f_, p.x, p.k, options_, rng_).total;
    prev_t_ = p.t;
    have_prev_ = true;
    last_ = p;
  }

  double integral() const { return integral_; }
  const PathPoint& last() const { return last_; }

 private:
  const ModelSpec& model_;
  const TestFunction& f_;
  const GeneratorOptions& options_;
  RandomStream* rng_;
  bool have_prev_ = false;
  double prev_t_ = 0.0;
  double prev_generator_ = 0.0;
  double integral_ = 0.0;
  PathPoint last_;
};

}  // namespace

DynkinResult dynkin_residual(const ModelSpec& model, const TestFunction& f, const Point& x0, Regime k0,
                             const SimConfig& config, const GeneratorOptions& options) {
  config.check(x0, k0);
  const double f0 = f(x0, k0);
  struct PerPath {
    bool ok = false;
    double terminal = 0.0;
    double integral = 0.0;
  };
  std::vector<PerPath> results(config.paths);
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    RandomStream marks(config.seed, i, Substream::generator_marks);
    DynkinObserver obs(model, f, options, &marks);
    PathOptions po;
    po.path_index = i;
    const PathStatus status = run_hybrid(model, x0, k0, config, po, obs);
    if (status != PathStatus::completed) return;
    results[i] = {true, f(obs.last().x, obs.last().k), obs.integral()};
  });
  DynkinResult out;
  RunningMoments resid, term, integ;
  for (const auto& r : results) {
    if (!r.ok) {
      ++out.excluded;
      continue;
    }
    resid.add(r.terminal - f0 - r.integral);
    term.add(r.terminal);
    integ.add(r.integral);
  }
  out.used = resid.count();
  out.residual = resid.mean();
  out.std_error = resid.std_error();
  out.terminal_mean = term.mean();
  out.integral_mean = integ.mean();
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian kernels and the jump-count series
// ---------------------------------------------------------------------------

GaussianKernel gaussian_kernel(const AffineRegime& r, const Point& x, double t) {
  const int d = static_cast<int>(x.size());
  GaussianKernel g;
  if (t <= 0.0) {
    g.mean = x;
    g.covariance = Matrix::Zero(d, d);
    return g;
  }
  if (d == 1) {
    const double a = r.drift_matrix(0, 0), c = r.drift_offset(0), s2 = r.diffusion.squaredNorm();
    const double e = std::exp(a * t);
    // (e^{a t} - 1)/a and (e^{2 a t} - 1)/(2a), continuous at a = 0
    const double i1 = std::abs(a * t) < 1e-8 ? t * (1.0 + 0.5 * a * t) : std::expm1(a * t) / a;
    const double i2 = std::abs(a * t) < 1e-8 ? t * (1.0 + a * t) : std::expm1(2.0 * a * t) / (2.0 * a);
    g.mean = make_point({e * x(0) + c * i1});
    g.covariance = Matrix::Constant(1, 1, s2 * i2);
    return g;
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d + 1);
  m.topLeftCorner(d, d) = r.drift_matrix;
  m.topRightCorner(d, 1) = r.drift_offset;
  const Eigen::MatrixXd em = (m * t).exp();
  g.mean = em.topLeftCorner(d, d) * x + em.topRightCorner(d, 1);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  v.topLeftCorner(d, d) = -r.drift_matrix;
  v.topRightCorner(d, d) = r.diffusion * r.diffusion.transpose();
  v.bottomRightCorner(d, d) = r.drift_matrix.transpose();
  const Eigen::MatrixXd ev = (v * t).exp();
  Eigen::MatrixXd cov = ev.bottomRightCorner(d, d).transpose() * ev.topRightCorner(d, d);
  g.covariance = 0.5 * (cov + cov.transpose());
  return g;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double interval_probability(double mean, double var, double lo, double hi) {
  if (var <= 0.0) return (mean >= lo && mean <= hi) ? 1.0 : 0.0;
  const double sd = std::sqrt(var);
  return std::max(0.0, normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd));
}

Point sample_gaussian(const GaussianKernel& g, RandomStream& rng) {
  const Eigen::Index d = g.mean.size();
  Point z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  if (d == 1) return make_point({g.mean(0) + std::sqrt(std::max(0.0, g.covariance(0, 0))) * z(0)});
  Eigen::SelfAdjointEigenSolver<Matrix> es(g.covariance);
  const Point root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return g.mean + es.eigenvectors() * root.cwiseProduct(z);
}

AffineRegime require_gaussian(const ModelSpec& model, Regime k) {
  if (!model.affine_regime) throw UnsupportedModel("regime " + std::to_string(k) + " has no Gaussian kernel");
  auto r = model.affine_regime(k);
  if (!r) throw UnsupportedModel("regime " + std::to_string(k) + " has no Gaussian kernel");
  return *r;
}

}  // namespace

double box_probability(const GaussianKernel& g, const Box& box) {
  const Eigen::Index d = g.mean.size();
  if (box.lo.size() != d || box.hi.size() != d) throw std::invalid_argument("box dimension mismatch");
  const double scale = g.covariance.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && std::abs(g.covariance(i, j)) > 1e-12 * std::max(scale, 1e-300))
        throw UnsupportedModel("box probability needs d = 1 or a diagonal covariance");
  double p = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) p *= interval_probability(g.mean(i), g.covariance(i, i), box.lo(i), box.hi(i));
  return p;
}

SeriesKernel transition_series(const ModelSpec& model, Regime k, double t, const Point& x0, const Box& box,
                               const SeriesOptions& options) {
  if (!(t > 0.0)) throw std::invalid_argument("series time must be positive");
  if (options.terms < 1) throw std::invalid_argument("series needs at least one term");
  if (!model.jumps.finite()) throw UnsupportedModel("series kernel needs a finite jump measure");
  const AffineRegime regime = require_gaussian(model, k);
  const double lambda = model.jumps.law() == MarkLaw::none ? 0.0 : model.jumps.total_mass();
  const double mean_jumps = t * lambda;

  SeriesKernel out;
  out.regime = k;
  out.t = t;
  out.terms_count = options.terms;
  double var = 0.0;
  for (int m = 1; m <= options.terms; ++m) {
    SeriesTerm term;
    term.jumps = m - 1;
    const int j = m - 1;
    term.weight = lambda > 0.0 ? std::exp(-mean_jumps + j * std::log(mean_jumps) - std::lgamma(j + 1.0))
                               : (j == 0 ? 1.0 : 0.0);
    if (j == 0) {
      term.conditional = box_probability(gaussian_kernel(regime, x0, t), box);
    } else if (term.weight > 0.0) {
      if (options.samples < 2) throw std::invalid_argument("series needs at least two samples per term");
      RunningMoments acc;
      std::vector<double> times(static_cast<std::size_t>(j));
      for (std::size_t s = 0; s < options.samples; ++s) {
        RandomStream times_rng(options.seed, s, Substream::jump_times, static_cast<std::uint64_t>(m));
        RandomStream marks_rng(options.seed, s, Substream::jump_marks, static_cast<std::uint64_t>(m));
        RandomStream gauss_rng(options.seed, s, Substream::brownian, static_cast<std::uint64_t>(m));
        for (auto& tau : times) tau = t * times_rng.uniform();
        std::sort(times.begin(), times.end());
        Point x = x0;
        double prev = 0.0;
        for (double tau : times) {
          x = sample_gaussian(gaussian_kernel(regime, x, tau - prev), gauss_rng);
          x += model.eval_jump(x, k, model.jumps.sample(marks_rng));
          prev = tau;
        }
        acc.add(box_probability(gaussian_kernel(regime, x, t - prev), box));
      }
      term.conditional = acc.mean();
      term.conditional_se = acc.std_error();
    }
    term.value = term.weight * term.conditional;
    out.estimate += term.value;
    var += std::pow(term.weight * term.conditional_se, 2);
    out.terms.push_back(term);
  }
  out.std_error = std::sqrt(var);
  out.remainder = lambda > 0.0 ? poisson_tail(mean_jumps, options.terms) : 0.0;
  return out;
}

namespace {

class LastPoint : public PathObserver {
 public:
  void on_point(const PathPoint& p) override { last = p; }
  PathPoint last;
};

}  // namespace

KernelEstimate direct_kernel_probability(const ModelSpec& model, Regime k, const Point& x0, const Box& box,
                                         const SimConfig& config) {
  config.check(x0, k);
  std::vector<int> hit(config.paths, -1);
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    LastPoint obs;
    PathOptions po;
    po.path_index = i;
    po.freeze_regime = true;
    if (run_hybrid(model, x0, k, config, po, obs) != PathStatus::completed) return;
    hit[i] = box.contains(obs.last.x) ? 1 : 0;
  });
  RunningMoments acc;
  KernelEstimate out;
  for (int h : hit) {
    if (h < 0)
      ++out.excluded;
    else
      acc.add(h);
  }
  out.probability = acc.mean();
  out.std_error = acc.std_error();
  out.used = acc.count();
  return out;
}

}  // namespace rsjd
