#include "rsjd/coupling.hpp"

#include "rsjd/drivers.hpp"
#include "rsjd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rsjd {

CoupledRates coupled_switch_rates(const ModelSpec& model, const Point& x, Regime i, const Point& z, Regime j) {
  CoupledRates out;
  if (model.rates.is_zero()) return out;
  const RateRow a = q_row(model, x, i);
  const RateRow b = q_row(model, z, j);
  // merge the two sparse rows by target; the diagonal entries q_ii, q_jj are excluded
  std::size_t p = 0, q = 0;
  while (p < a.entries.size() || q < b.entries.size()) {
    CoupledRates::Entry e;
    double ra = 0.0, rb = 0.0;
    if (q == b.entries.size() || (p < a.entries.size() && a.entries[p].target < b.entries[q].target)) {
      e.target = a.entries[p].target;
      ra = a.entries[p++].rate;
    } else if (p == a.entries.size() || b.entries[q].target < a.entries[p].target) {
      e.target = b.entries[q].target;
      rb = b.entries[q++].rate;
    } else {
      e.target = a.entries[p].target;
      ra = a.entries[p++].rate;
      rb = b.entries[q++].rate;
    }
    e.excess1 = std::max(ra - rb, 0.0);
    e.excess2 = std::max(rb - ra, 0.0);
    e.joint = std::min(ra, rb);
    out.total_excess1 += e.excess1;
    out.total_excess2 += e.excess2;
    out.total_joint += e.joint;
    out.entries.push_back(e);
  }
  return out;
}

namespace {

double snap(double c, double dt, double horizon) {
  if (std::abs(c - horizon) <= 1e-9 * dt) return horizon;
  const double g = std::round(c / dt) * dt;
  return std::abs(g - c) <= 1e-9 * dt ? g : c;
}

struct Clock {
  double threshold = 0.0;
  double acc = 0.0;
  double rate = 0.0;
};

}  // namespace

CoupledPath simulate_coupled(const ModelSpec& model, const Point& x0, const Point& z0, Regime k0,
                             const SimConfig& config, const CoupledOptions& options) {
  config.check(x0, k0);
  config.check(z0, k0);
  model.check();
  if (!model.jumps.finite()) throw UnsupportedModel("coupled simulation needs a finite jump measure");
  const std::uint64_t idx = options.path_index;
  RandomStream brownian(config.seed, idx, Substream::brownian), bridge(config.seed, idx, Substream::bridge);
  RandomStream clock1(config.seed, idx, Substream::switch_clock), target1(config.seed, idx, Substream::switch_target);
  RandomStream clock2(config.seed, idx, Substream::second_clock), target2(config.seed, idx, Substream::second_target);
  JumpSource jumps(model.jumps, RandomStream(config.seed, idx, Substream::jump_times),
                   RandomStream(config.seed, idx, Substream::jump_marks));

  CoupledPath path;
  path.checkpoints = options.checkpoints.empty() ? std::vector<double>{config.horizon} : options.checkpoints;
  for (auto& c : path.checkpoints) {
    if (c < 0.0 || c > config.horizon + 1e-12) throw std::invalid_argument("checkpoint outside [0, T]");
    c = snap(c, config.dt, config.horizon);
  }
  std::sort(path.checkpoints.begin(), path.checkpoints.end());
  std::size_t next_cp = 0;

  double t = 0.0;
  Point x = x0, z = z0;
  Regime k = k0, l = k0;
  bool decoupled = false;
  double zeta_distance = 0.0;
  double integral = 0.0;
  const bool switching = !model.rates.is_zero();
  const double radius = config.explosion_radius;
  auto ok = [radius](const Point& p) { return p.allFinite() && p.norm() <= radius; };
  auto rate1 = [&](const Point& a, Regime i, const Point& b, Regime j) {
    return decoupled ? total_rate(model, a, i) : coupled_switch_rates(model, a, i, b, j).total();
  };
  auto rate2 = [&](const Point& b, Regime j) { return decoupled ? total_rate(model, b, j) : 0.0; };

  Clock c1, c2;
  if (switching) {
    c1 = {clock1.exponential(), 0.0, rate1(x, k, z, l)};
  }
  auto record = [&] {
    if (options.record) path.states.push_back({t, x, k, z, l});
  };
  auto checkpoint = [&] {
    while (next_cp < path.checkpoints.size() && path.checkpoints[next_cp] == t) {
      path.at_checkpoint.push_back({t, x, k, z, l});
      path.stopped_distance.push_back(decoupled ? zeta_distance : (x - z).norm());
      path.stopped_integral.push_back(integral);
      ++next_cp;
    }
  };
  record();
  checkpoint();

  BrownianCell cell;
  std::uint64_t cell_index = 0;
  bool cell_ready = false;
  const double inf = std::numeric_limits<double>::infinity();

  while (t < config.horizon) {
    if (!cell_ready || t >= cell.hi()) {
      if (cell_ready) ++cell_index;
      const double lo = cell_index == 0 ? 0.0 : static_cast<double>(cell_index) * config.dt;
      double hi = static_cast<double>(cell_index + 1) * config.dt;
      if (hi > config.horizon || config.horizon - hi < 1e-9 * config.dt) hi = config.horizon;
      Point inc(model.dimension);
      const double sd = std::sqrt(hi - lo);
      for (Eigen::Index i = 0; i < inc.size(); ++i) inc(i) = sd * brownian.normal();
      cell.reset(lo, hi, inc);
      cell_ready = true;
    }
    double t_next = std::min(cell.hi(), jumps.next_time());
    if (next_cp < path.checkpoints.size()) t_next = std::min(t_next, path.checkpoints[next_cp]);
    const double h = t_next - t;
    const Point w0 = cell.at(t, bridge);
    const Point dw = cell.at(t_next, bridge) - w0;
    const Point bx = model.eval_drift(x, k), bz = model.eval_drift(z, l);
    const Matrix sx = model.eval_diffusion(x, k), sz = model.eval_diffusion(z, l);
    const Point xn = x + bx * h + sx * dw;
    const Point zn = z + bz * h + sz * dw;

    if (switching && h > 0.0) {
      const bool finite_step = ok(xn) && ok(zn);
      const double r1n = finite_step ? rate1(xn, k, zn, l) : c1.rate;
      const double r2n = finite_step ? rate2(zn, l) : c2.rate;
      const double inc1 = 0.5 * (c1.rate + r1n) * h;
      const double inc2 = decoupled ? 0.5 * (c2.rate + r2n) * h : 0.0;
      const double th1 = c1.acc + inc1 > c1.threshold ? (c1.threshold - c1.acc) / inc1 : inf;
      const double th2 = decoupled && c2.acc + inc2 > c2.threshold ? (c2.threshold - c2.acc) / inc2 : inf;
      const double theta = std::min(th1, th2);
      if (theta < inf) {
        const double ts = t + std::clamp(theta, 0.0, 1.0) * h;
        if (ts > t) {
          const Point dws = cell.at(ts, bridge) - w0;
          if (!decoupled) integral += (x - z).norm() * (ts - t);
          x = x + bx * (ts - t) + sx * dws;
          z = z + bz * (ts - t) + sz * dws;
          t = ts;
        }
        if (!ok(x) || !ok(z)) {
          path.status = PathStatus::exploded;
          break;
        }
        const bool first = th1 <= th2;
        if (decoupled) {
          // the clock that did not fire keeps its partial increment
          if (first)
            c2.acc += theta * inc2;
          else
            c1.acc += theta * inc1;
        }
        if (!decoupled) {
          const CoupledRates cr = coupled_switch_rates(model, x, k, z, l);
          double r = target1.uniform() * cr.total();
          Regime nk = k, nl = l;
          for (const auto& e : cr.entries) {
            if (r < e.excess1) {
              nk = e.target;
              break;
            }
            r -= e.excess1;
            if (r < e.excess2) {
              nl = e.target;
              break;
            }
            r -= e.excess2;
            if (r < e.joint) {
              nk = nl = e.target;
              break;
            }
            r -= e.joint;
          }
          if (std::max(nk, nl) > config.regime_ceiling) {
            path.status = PathStatus::ceiling;
            break;
          }
          k = nk;
          l = nl;
          if (k != l) {
            decoupled = true;
            path.zeta = t;
            zeta_distance = (x - z).norm();
            c1 = {clock1.exponential(), 0.0, total_rate(model, x, k)};
            c2 = {clock2.exponential(), 0.0, total_rate(model, z, l)};
          } else {
            c1 = {clock1.exponential(), 0.0, rate1(x, k, z, l)};
          }
        } else if (first) {
          const Regime nk = sample_switch_target(model, x, k, target1);
          if (nk > config.regime_ceiling) {
            path.status = PathStatus::ceiling;
            break;
          }
          k = nk;
          c1 = {clock1.exponential(), 0.0, total_rate(model, x, k)};
          c2.rate = rate2(z, l);
        } else {
          const Regime nl = sample_switch_target(model, z, l, target2);
          if (nl > config.regime_ceiling) {
            path.status = PathStatus::ceiling;
            break;
          }
          l = nl;
          c2 = {clock2.exponential(), 0.0, total_rate(model, z, l)};
          c1.rate = rate1(x, k, z, l);
        }
        record();
        checkpoint();
        continue;
      }
      c1.acc += inc1;
      c1.rate = r1n;
      c2.acc += inc2;
      c2.rate = r2n;
    }
    if (!ok(xn) || !ok(zn)) {
      path.status = PathStatus::exploded;
      break;
    }
    if (!decoupled) integral += (x - z).norm() * h;
    x = xn;
    z = zn;
    t = t_next;
    if (t == jumps.next_time()) {
      const Mark u = jumps.take();
      x += model.eval_jump(x, k, u);
      z += model.eval_jump(z, l, u);
      if (!ok(x) || !ok(z)) {
        path.status = PathStatus::exploded;
        break;
      }
      if (switching) {
        c1.rate = rate1(x, k, z, l);
        c2.rate = rate2(z, l);
      }
    }
    record();
    checkpoint();
  }
  return path;
}

namespace {

std::vector<CoupledPath> run_replicas(const ModelSpec& model, const Point& x, const Point& z, Regime k,
                                      const SimConfig& config, const std::vector<double>& checkpoints) {
  std::vector<CoupledPath> paths(config.paths);
  parallel_for(config.paths, config.workers, [&](std::size_t i) {
    CoupledOptions o;
    o.checkpoints = checkpoints;
    o.path_index = i;
    o.record = false;
    paths[i] = simulate_coupled(model, x, z, k, config, o);
  });
  return paths;
}

}  // namespace

CouplingReport contraction_estimate(const ModelSpec& model, const Point& x, const Point& z, Regime k,
                                    const SimConfig& config, const std::vector<double>& checkpoints) {
  if (checkpoints.empty()) throw std::invalid_argument("contraction estimate needs checkpoints");
  const auto paths = run_replicas(model, x, z, k, config, checkpoints);
  CouplingReport report;
  report.gap = (x - z).norm();
  const std::size_t nc = paths.front().checkpoints.size();
  std::vector<RunningMoments> dist(nc), dec(nc), integ(nc), xm(nc), zm(nc);
  for (const auto& p : paths) {
    if (p.status != PathStatus::completed) {
      ++report.excluded;
      continue;
    }
    ++report.used;
    for (std::size_t c = 0; c < nc; ++c) {
      dist[c].add(p.stopped_distance[c]);
      dec[c].add(p.zeta && *p.zeta <= p.checkpoints[c] ? 1.0 : 0.0);
      integ[c].add(p.stopped_integral[c]);
      xm[c].add(p.at_checkpoint[c].x(0));
      zm[c].add(p.at_checkpoint[c].z(0));
    }
  }
  auto est = [](const RunningMoments& m) { return MeanEstimate{m.mean(), m.std_error(), m.count()}; };
  std::vector<double> ts, ys;
  report.exact_coupling = true;
  report.fitted_c = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < nc; ++c) {
    CouplingPoint pt{paths.front().checkpoints[c], est(dist[c]), est(dec[c]), est(integ[c]), est(xm[c]), est(zm[c])};
    report.points.push_back(pt);
    if (pt.distance.mean > 0.0) report.exact_coupling = false;
    if (pt.t > 0.0 && pt.distance.mean > 0.0 && report.gap > 0.0) {
      const double y = std::log(pt.distance.mean / report.gap);
      ts.push_back(pt.t);
      ys.push_back(y);
      report.fitted_c = std::max(report.fitted_c, y / pt.t);
    }
  }
  if (report.exact_coupling || ts.empty()) {
    report.fitted_c = 0.0;
    report.bound_holds = true;
    return report;
  }
  if (ts.size() >= 2) {
    const LinearFit fit = fit_line(ts, ys);
    report.regression_c = fit.slope;
    report.fit_intercept = fit.intercept;
    report.fit_r_squared = fit.r_squared;
  } else {
    report.regression_c = report.fitted_c;
    report.fit_r_squared = 1.0;
  }
  report.bound_holds = true;
  for (const auto& pt : report.points)
    if (pt.distance.mean > report.gap * std::exp(report.fitted_c * pt.t) + 3.0 * pt.distance.std_error)
      report.bound_holds = false;
  return report;
}

MeanEstimate decoupling_probability(const ModelSpec& model, const Point& x, const Point& z, Regime k,
                                    const SimConfig& config) {
  const auto paths = run_replicas(model, x, z, k, config, {config.horizon});
  RunningMoments m;
  for (const auto& p : paths)
    if (p.status == PathStatus::completed) m.add(p.zeta ? 1.0 : 0.0);
  return {m.mean(), m.std_error(), m.count()};
}

}  // namespace rsjd
