#include "rsjd/app.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace rsjd::app {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{:.10g}", v); }

std::string point_cells(const Point& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + num(x(i));
  return s;
}

std::string point_text(const Point& x) { return "(" + point_cells(x) + ")"; }

std::string coordinate_header(int d) {
  std::string s;
  for (int i = 0; i < d; ++i) s += (i ? ",x_" : "x_") + std::to_string(i);
  return s;
}

json point_json(const Point& x) {
  json a = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x(i));
  return a;
}

/// Collects output files in one directory; single writer.
class Outputs {
 public:
  Outputs(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  /// Writes `<command>_<name>`.
  void write(const std::string& name, const std::string& kind, const std::string& content) {
    const fs::path p = dir_ / (prefix() + name);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw IoError("cannot write " + p.string());
    files_.push_back(p);
    entries_.push_back({{"file", p.filename().string()}, {"kind", kind}});
  }

  std::string prefix() const {
    std::string s = command_;
    std::replace(s.begin(), s.end(), '-', '_');
    return s + "_";
  }

  const std::vector<fs::path>& files() const { return files_; }
  const json& entries() const { return entries_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<fs::path> files_;
  json entries_ = json::array();
};

/// Structured text: "key: value" lines and indented tables.
class Text {
 public:
  Text& field(const std::string& key, const std::string& value) {
    s_ << key << ": " << value << "\n";
    return *this;
  }
  Text& field(const std::string& key, double value) { return field(key, num(value)); }
  Text& line(const std::string& l) {
    s_ << l << "\n";
    return *this;
  }
  std::string str() const { return s_.str(); }

 private:
  std::ostringstream s_;
};

std::string yes_no(bool b) { return b ? "yes" : "no"; }

template <class T>
const T& need(const std::optional<T>& section, const std::string& name) {
  if (!section) throw ConfigError("experiments." + name, "required by the " + name + " subcommand");
  return *section;
}

struct Outcome {
  bool passed = true;
  std::string summary;
  json details = json::object();
};

// ---------------------------------------------------------------------------

Outcome run_simulate(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const SimulateSpec spec = c.simulate ? *c.simulate : SimulateSpec{};
  BatchOptions o;
  o.checkpoints = spec.checkpoints.empty() ? std::vector<double>{sim.horizon} : spec.checkpoints;
  o.average_from = spec.average_from;
  o.retain_paths = c.output.retain_paths;
  o.retain_stride = c.output.stride;
  o.freeze_regime = spec.freeze_regime;
  const EnsembleStats st = simulate_batch(c.model, c.x0, c.k0, sim, o);

  std::string csv = "t,functional,mean,variance,std_error\n";
  for (std::size_t t = 0; t < st.times.size(); ++t)
    for (std::size_t f = 0; f < st.functionals.size(); ++f)
      csv += fmt::format("{},{},{},{},{}\n", num(st.times[t]), st.functionals[f], num(st.mean[f][t]), num(st.variance[f][t]),
                         num(st.std_error[f][t]));
  out.write("summary.csv", "ensemble summary", csv);

  std::string m = "quantity,mean,std_error,count\n";
  m += fmt::format("sup |x|^2,{},{},{}\n", num(st.sup_x_sq.mean), num(st.sup_x_sq.std_error), st.sup_x_sq.count);
  m += fmt::format("sup lambda^2,{},{},{}\n", num(st.sup_lambda_sq.mean), num(st.sup_lambda_sq.std_error),
                   st.sup_lambda_sq.count);
  for (std::size_t f = 0; f < st.time_average.size(); ++f)
    m += fmt::format("time average {},{},{},{}\n", st.functionals[f], num(st.time_average[f].mean),
                     num(st.time_average[f].std_error), st.time_average[f].count);
  out.write("moments.csv", "sup-moment and time-average estimates", m);

  if (!st.retained.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < st.retained.size(); ++i)
      for (const auto& p : st.retained[i].points)
        lines += json{{"path", i}, {"t", p.t}, {"x", point_json(p.x)}, {"lambda", p.k}, {"tag", to_string(p.tag)}}.dump() +
                 "\n";
    out.write("paths.jsonl", "retained path samples", lines);
  }
  Outcome r;
  r.passed = st.completed > 0;
  r.summary = fmt::format("{} completed, {} exploded, {} hit the ceiling", st.completed, st.exploded, st.ceiling);
  r.details = {{"completed", st.completed}, {"exploded", st.exploded}, {"ceiling", st.ceiling}};
  return r;
}

Outcome run_couple(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const CoupleSpec& spec = need(c.couple, "couple");
  std::string rows = "gap,t,distance,distance_se,decoupled,decoupled_se,x_mean,x_mean_se,z_mean,z_mean_se\n";
  std::string fits = "gap,fitted_c,regression_c,intercept,r_squared,bound_holds,exact_coupling,decoupled_ratio,used,excluded\n";
  Outcome r;
  json per_gap = json::array();
  for (double gap : spec.gaps) {
    const Point z0 = c.x0 + gap * spec.direction;
    const CouplingReport rep = contraction_estimate(c.model, c.x0, z0, c.k0, sim, spec.checkpoints);
    for (const auto& p : rep.points)
      rows += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(gap), num(p.t), num(p.distance.mean), num(p.distance.std_error),
                          num(p.decoupled.mean), num(p.decoupled.std_error), num(p.x_mean.mean), num(p.x_mean.std_error),
                          num(p.z_mean.mean), num(p.z_mean.std_error));
    const double ratio = gap > 0.0 ? rep.points.back().decoupled.mean / gap : 0.0;
    fits += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(gap), num(rep.fitted_c), num(rep.regression_c),
                        num(rep.fit_intercept), num(rep.fit_r_squared), yes_no(rep.bound_holds), yes_no(rep.exact_coupling),
                        num(ratio), rep.used, rep.excluded);
    r.passed = r.passed && rep.bound_holds;
    per_gap.push_back({{"gap", gap}, {"fitted_c", rep.fitted_c}, {"bound_holds", rep.bound_holds}});
  }
  out.write("distances.csv", "stopped distances and decoupling frequencies (x/z means include post-zeta paths)", rows);
  out.write("fits.csv", "fitted contraction constants", fits);
  r.summary = r.passed ? "contraction bound holds at every gap" : "contraction bound fails at some gap";
  r.details = {{"gaps", per_gap}};
  return r;
}

Outcome run_generator_test(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const GeneratorSpec& spec = need(c.generator_test, "generator-test");
  const auto points = spec.region.materialize(c.model.dimension);
  std::string csv = coordinate_header(c.model.dimension) + ",k,f,local,jump,switching,total,jump_se,flagged\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    RandomStream marks(sim.seed, i, Substream::generator_marks);
    const auto& p = points[i];
    const GeneratorValue g = apply_generator(c.model, spec.function, p.x, p.k, spec.options, &marks);
    flagged += g.flagged ? 1 : 0;
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", point_cells(p.x), p.k, num(spec.function(p.x, p.k)), num(g.local),
                       num(g.jump), num(g.switching), num(g.total), num(g.jump_std_error), yes_no(g.flagged));
  }
  out.write("values.csv", "generator decomposition", csv);
  Outcome r;
  r.passed = flagged == 0;
  r.summary = fmt::format("{} points, {} flagged", points.size(), flagged);
  r.details = {{"points", points.size()}, {"flagged", flagged}};
  if (spec.dynkin) {
    const DynkinResult d = dynkin_residual(c.model, spec.function, c.x0, c.k0, sim, spec.options);
    out.write("dynkin.csv", "Dynkin residual",
              fmt::format("t,dt,residual,std_error,terminal_mean,integral_mean,used,excluded\n{},{},{},{},{},{},{},{}\n",
                          num(sim.horizon), num(sim.dt), num(d.residual), num(d.std_error), num(d.terminal_mean),
                          num(d.integral_mean), d.used, d.excluded));
    const bool ok = std::abs(d.residual) <= 3.0 * d.std_error;
    r.passed = r.passed && ok;
    r.summary += fmt::format("; Dynkin residual {} (SE {})", num(d.residual), num(d.std_error));
    r.details["dynkin_residual"] = d.residual;
    r.details["dynkin_std_error"] = d.std_error;
  }
  return r;
}

Outcome run_kernel_series(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const KernelSpec& spec = need(c.kernel_series, "kernel-series");
  const SeriesKernel s = transition_series(c.model, spec.regime, spec.t, c.x0, spec.box, spec.series);
  std::string csv = "term,jumps,weight,conditional,conditional_se,value\n";
  for (std::size_t m = 0; m < s.terms.size(); ++m) {
    const auto& t = s.terms[m];
    csv += fmt::format("{},{},{},{},{},{}\n", m + 1, t.jumps, num(t.weight), num(t.conditional), num(t.conditional_se),
                       num(t.value));
  }
  out.write("terms.csv", "series terms", csv);
  std::string sum = "quantity,value,std_error\n";
  sum += fmt::format("series,{},{}\nremainder,{},0\n", num(s.estimate), num(s.std_error), num(s.remainder));
  Outcome r;
  r.summary = fmt::format("series {} (SE {}), remainder {}", num(s.estimate), num(s.std_error), num(s.remainder));
  r.details = {{"estimate", s.estimate}, {"std_error", s.std_error}, {"remainder", s.remainder}};
  if (spec.direct) {
    SimConfig dc = sim;
    dc.horizon = spec.t;
    const KernelEstimate d = direct_kernel_probability(c.model, spec.regime, c.x0, spec.box, dc);
    sum += fmt::format("direct,{},{}\n", num(d.probability), num(d.std_error));
    const double se = std::hypot(s.std_error, d.std_error);
    r.passed = std::abs(s.estimate - d.probability) <= 3.0 * se + s.remainder;
    r.summary += fmt::format("; direct {} (SE {})", num(d.probability), num(d.std_error));
    r.details["direct"] = d.probability;
    r.details["direct_std_error"] = d.std_error;
  }
  out.write("summary.csv", "series estimate, remainder bound and direct comparison", sum);
  return r;
}

Outcome run_change_measure(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const ChangeMeasureSpec& spec = need(c.change_measure, "change-measure");
  const Regime band = c.model.rates.max_regime ? *c.model.rates.max_regime : std::max(c.k0, spec.kappa) + spec.kappa;
  const AuxiliaryChainSpec aux = build_qhat(spec.kappa, band);
  const WeightedEstimate w = weighted_expectation(c.model, aux, spec.function, c.x0, c.k0, sim, spec.chain_salt);
  std::string csv = "estimator,estimate,std_error,count,effective_sample_size,zero_weights,excluded\n";
  csv += fmt::format("weighted,{},{},{},{},{},{}\n", num(w.estimate.mean), num(w.estimate.std_error), w.estimate.count,
                     num(w.effective_sample_size), w.zero_weights, w.excluded);
  csv += fmt::format("weight,{},{},{},{},{},{}\n", num(w.weight.mean), num(w.weight.std_error), w.weight.count,
                     num(w.effective_sample_size), w.zero_weights, w.excluded);
  Outcome r;
  r.passed = !w.degenerate && std::abs(w.weight.mean - 1.0) <= 3.0 * w.weight.std_error;
  r.summary = fmt::format("weighted {} (SE {}), mean weight {} (SE {}), ESS {}", num(w.estimate.mean),
                          num(w.estimate.std_error), num(w.weight.mean), num(w.weight.std_error),
                          num(w.effective_sample_size));
  r.details = {{"estimate", w.estimate.mean}, {"weight", w.weight.mean}, {"degenerate", w.degenerate}};
  if (spec.direct) {
    std::size_t excluded = 0;
    const MeanEstimate d = direct_expectation(c.model, spec.function, c.x0, c.k0, sim, &excluded);
    csv += fmt::format("direct,{},{},{},{},0,{}\n", num(d.mean), num(d.std_error), d.count, d.count, excluded);
    r.passed = r.passed && std::abs(d.mean - w.estimate.mean) <= 3.0 * std::hypot(d.std_error, w.estimate.std_error);
    r.summary += fmt::format("; direct {} (SE {})", num(d.mean), num(d.std_error));
    r.details["direct"] = d.mean;
  }
  out.write("estimates.csv", "weighted and direct estimates", csv);
  return r;
}

void witness_table(Text& t, const DriftCertificate& cert, std::size_t limit) {
  std::vector<std::size_t> order = cert.violations;
  auto excess = [&](std::size_t i) {
    const auto& s = cert.samples[i];
    return s.av + cert.alpha * s.v - cert.gamma;
  };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return excess(a) > excess(b); });
  if (order.size() > limit) order.resize(limit);
  t.line("witnesses:");
  t.line("  x | k | V | AV | AV + alpha V - gamma | jump_se");
  for (auto i : order) {
    const auto& s = cert.samples[i];
    t.line(fmt::format("  {} | {} | {} | {} | {} | {}", point_text(s.x), s.k, num(s.v), num(s.av), num(excess(i)),
                       num(s.jump_se)));
  }
}

Outcome run_drift_check(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const DriftCheckSpec& spec = need(c.drift_check, "drift-check");
  DriftCertificate cert = check_drift(c.model, spec.lyapunov, spec.region.materialize(c.model.dimension), spec.alpha,
                                      spec.gamma, spec.tolerance, spec.options, sim.seed);
  cert.region = spec.region.describe();
  Text t;
  t.field("certificate", "Foster-Lyapunov drift AV <= -alpha V + gamma")
      .field("lyapunov", cert.lyapunov)
      .field("alpha", cert.alpha)
      .field("gamma", cert.gamma)
      .field("tolerance", cert.tolerance)
      .field("region", cert.region)
      .field("samples", std::to_string(cert.samples.size()))
      .field("unknown", std::to_string(cert.unknown))
      .field("violations", std::to_string(cert.violations.size()))
      .field("status", cert.status());
  witness_table(t, cert, 20);
  out.write("certificate.txt", "drift certificate", t.str());
  std::string csv = coordinate_header(c.model.dimension) + ",k,V,AV,jump_se,unknown\n";
  for (const auto& s : cert.samples)
    csv += fmt::format("{},{},{},{},{},{}\n", point_cells(s.x), s.k, num(s.v), num(s.av), num(s.jump_se), yes_no(s.unknown));
  out.write("samples.csv", "sampled (V, AV) pairs", csv);
  Outcome r;
  r.passed = cert.passed();
  r.summary = cert.status();
  r.details = {{"violations", cert.violations.size()}, {"unknown", cert.unknown}, {"samples", cert.samples.size()}};
  return r;
}

Outcome run_drift_fit(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const DriftFitSpec& spec = need(c.drift_fit, "drift-fit");
  const auto samples =
      drift_samples(c.model, spec.lyapunov, spec.region.materialize(c.model.dimension), spec.options, sim.seed);
  const DriftFit fit = fit_drift(samples, spec.fit);
  Text t;
  t.field("fit", "largest grid alpha with max(AV + alpha V) <= gamma cap")
      .field("lyapunov", spec.lyapunov.name)
      .field("region", spec.region.describe())
      .field("gamma_cap", spec.fit.gamma_cap)
      .field("status", fit.certified ? "certificate" : "no certificate");
  if (fit.certified) t.field("alpha", fit.alpha).field("gamma", fit.gamma);
  out.write("result.txt", "fitted drift constants", t.str());
  std::string csv = "alpha,gamma\n";
  for (std::size_t i = 0; i < fit.alpha_grid.size(); ++i)
    csv += fmt::format("{},{}\n", num(fit.alpha_grid[i]), num(fit.gamma_grid[i]));
  out.write("grid.csv", "gamma(alpha) envelope", csv);
  Outcome r;
  r.passed = fit.certified;
  r.summary = fit.certified ? fmt::format("alpha {} gamma {}", num(fit.alpha), num(fit.gamma)) : "no certificate";
  r.details = {{"certified", fit.certified}, {"alpha", fit.alpha}, {"gamma", fit.gamma}};
  return r;
}

Outcome run_linearized(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const LinearizedCheckSpec& spec = need(c.linearized_check, "linearized-check");
  const LinearizedSpec lin = linearize_affine(c.model, spec.max_regime, spec.p, spec.alpha, spec.g, spec.radius, spec.budget);
  const LinearizedResult res = check_linearized(lin, c.model, spec.directions, sim.seed);
  Text t;
  t.field("check", "sum_j q_ij(x) g_j + p (alpha + mu_i) g_i <= 0 at |x| = r and 2r")
      .field("p", spec.p)
      .field("alpha", spec.alpha)
      .field("radius", spec.radius)
      .field("max_regime", std::to_string(spec.max_regime))
      .field("worst_margin", res.worst_margin)
      .field("radius_consistent", yes_no(res.radius_consistent))
      .field("status", res.passed ? "pass" : "fail");
  if (res.witness) t.field("witness", point_text(res.witness->x) + " k=" + std::to_string(res.witness->k));
  t.line("regimes:");
  t.line("  i | mu_i | c_hat | g_i | margin(r) | margin(2r)");
  for (Regime i = 0; i <= spec.max_regime; ++i) {
    const auto u = static_cast<std::size_t>(i);
    t.line(fmt::format("  {} | {} | {} | {} | {} | {}", i, num(mu_i(lin, i)), num(lin.regimes[u].c_hat), num(lin.g(i)),
                       num(res.regime_margins[u]), num(res.regime_margins_2r[u])));
  }
  out.write("result.txt", "linearized condition check", t.str());
  Outcome r;
  r.passed = res.passed;
  r.summary = fmt::format("{} with worst margin {}", res.passed ? "pass" : "fail", num(res.worst_margin));
  r.details = {{"worst_margin", res.worst_margin}, {"radius_consistent", res.radius_consistent}};
  return r;
}

Outcome run_ergodicity(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const ErgodicitySpec& spec = need(c.ergodicity, "ergodicity");
  const ErgodicityReport rep = empirical_convergence(c.model, spec.starts, sim, spec.options);
  std::string csv = "start,t,distance,mean_x_sq,mean_lambda\n";
  for (std::size_t s = 0; s < rep.series.size(); ++s)
    for (std::size_t i = 0; i < rep.checkpoints.size(); ++i)
      csv += fmt::format("{},{},{},{},{}\n", s, num(rep.checkpoints[i]), num(rep.series[s].distance[i]),
                         num(rep.series[s].mean_x_sq[i]), num(rep.series[s].mean_lambda[i]));
  out.write("distances.csv", "distance proxy per start and checkpoint", csv);
  Text t;
  t.field("report", "empirical convergence to the long-run law")
      .field("proxy", rep.proxy)
      .field("certified_model", yes_no(rep.certified))
      .field("bins", std::to_string(rep.bins))
      .field("reference_samples", std::to_string(rep.reference_samples))
      .field("undersampled_bins", std::to_string(rep.undersampled_bins))
      .field("noise_floor", rep.noise_floor)
      .field("fit_floor", rep.fit_floor)
      .field("start_spread", rep.start_spread);
  t.line("starts:");
  t.line("  x | k | rate | intercept | r_squared | fit points | final distance | excluded");
  Outcome r;
  for (const auto& s : rep.series) {
    t.line(fmt::format("  {} | {} | {} | {} | {} | {} | {} | {}", point_text(s.x0), s.k0, num(s.fit.slope),
                       num(s.fit.intercept), num(s.fit.r_squared), s.fit_points, num(s.distance.back()), s.excluded));
    r.passed = r.passed && s.fit_points >= 2 && s.fit.slope < 0.0;
  }
  if (!rep.certified) t.line("note: model not certified; experiment run on user request");
  out.write("report.txt", "convergence report", t.str());
  r.summary = fmt::format("{} starts, rates {}", rep.series.size(), r.passed ? "all negative" : "not all negative");
  json rates = json::array();
  for (const auto& s : rep.series) rates.push_back({{"rate", s.fit.slope}, {"r_squared", s.fit.r_squared}});
  r.details = {{"series", rates}, {"undersampled_bins", rep.undersampled_bins}, {"start_spread", rep.start_spread}};
  return r;
}

void condition_line(Text& t, const std::string& name, const ConditionResult& c) {
  std::string s = fmt::format("{} (worst excess {})", c.passed ? "pass" : "fail", num(c.worst));
  if (c.witness) s += fmt::format(" witness x={} k={}", point_text(c.witness->x), c.witness->k);
  t.field(name, s);
}

Outcome run_ou_example(const RunConfig& c, const SimConfig& sim, Outputs& out) {
  const OuExampleSpec& spec = need(c.ou_example, "ou-example");
  const CoupledOuParams params = parse_coupled_ou(c.model_section, "model");
  const double j = jump_second_moment(params.jumps);
  const double k2 = spec.k2 ? *spec.k2 : ou_example_k2(params, j, spec.max_regime);
  const auto probes = spec.probes.materialize(1);
  std::vector<Point> xs;
  for (const auto& p : probes) xs.push_back(p.x);
  const OuConditions cond = ou_example_conditions(params, spec.k1, k2, j, xs, spec.max_regime);

  RegionSpec region = spec.probes;
  if (region.points.empty()) region.max_regime = spec.max_regime;
  DriftCertificate cert =
      check_drift(c.model, test_functions::lyapunov_ou(), region.materialize(1), spec.k1, k2, 1e-9, {}, sim.seed);
  cert.region = region.describe();

  Text t;
  t.field("example", "coupled one-dimensional OU with V(x,k) = (k+1) x^2")
      .field("jump_constant_J", j)
      .field("K1", spec.k1)
      .field("K2", k2)
      .field("K2_source", spec.k2 ? "config" : "computed from J")
      .field("max_regime", std::to_string(spec.max_regime))
      .field("condition_probes", spec.probes.describe())
      .field("drift_region", cert.region);
  condition_line(t, "condition_a", cond.a);
  condition_line(t, "condition_b", cond.b);
  condition_line(t, "condition_c", cond.c);
  t.field("drift_check", cert.status());
  witness_table(t, cert, 10);
  out.write("report.txt", "example conditions and drift certificate", t.str());
  Outcome r;
  r.passed = cond.passed() && cert.passed();
  r.summary = fmt::format("J {} K2 {}: conditions {}, drift {}", num(j), num(k2), cond.passed() ? "pass" : "fail",
                          cert.status());
  r.details = {{"J", j}, {"K2", k2}, {"a", cond.a.passed}, {"b", cond.b.passed}, {"c", cond.c.passed},
               {"drift_violations", cert.violations.size()}};
  return r;
}

Outcome run_validate(const RunConfig& c, const SimConfig&, Outputs& out) {
  const ValidateSpec spec = c.validate ? *c.validate : ValidateSpec{RegionSpec{10.0, 0, 200, {}, 11}, {}};
  const AssumptionReport rep = validate_assumptions(c.model, spec.probes.materialize(c.model.dimension), spec.options);
  Text t;
  t.field("report", "assumption probes").field("probes", spec.probes.describe()).field("tolerance", spec.options.tolerance);
  t.line("checks:");
  t.line("  name | status | worst ratio | probes | witness | note");
  for (const auto& ch : rep.checks) {
    std::string w = "-";
    if (ch.witness) {
      w = point_text(ch.witness->x) + " k=" + std::to_string(ch.witness->k);
      if (ch.witness_partner) w += " vs " + point_text(*ch.witness_partner);
    }
    t.line(fmt::format("  {} | {} | {} | {} | {} | {}", ch.name, to_string(ch.status), num(ch.worst_ratio), ch.probes, w,
                       ch.note.empty() ? "-" : ch.note));
  }
  const std::string status = rep.all_passed() ? "pass at " + std::to_string(rep.probe_count) + " probes" : "fail";
  t.field("status", status);
  out.write("report.txt", "assumption report", t.str());
  Outcome r;
  r.passed = rep.all_passed();
  r.summary = status;
  json checks = json::object();
  for (const auto& ch : rep.checks) checks[ch.name] = to_string(ch.status);
  r.details = {{"checks", checks}};
  return r;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run(const std::string& command, const RunConfig& config, const RunOptions& options) {
  using Runner = Outcome (*)(const RunConfig&, const SimConfig&, Outputs&);
  static const std::map<std::string, Runner> runners{
      {"simulate", run_simulate},         {"couple", run_couple},
      {"generator-test", run_generator_test}, {"kernel-series", run_kernel_series},
      {"change-measure", run_change_measure}, {"drift-check", run_drift_check},
      {"drift-fit", run_drift_fit},       {"linearized-check", run_linearized},
      {"ergodicity", run_ergodicity},     {"ou-example", run_ou_example},
      {"validate", run_validate}};
  const auto it = runners.find(command);
  if (it == runners.end()) throw ConfigError("command", "unknown subcommand '" + command + "'");

  SimConfig sim = config.sim;
  sim.workers = std::max(1u, options.workers);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  Outputs out(config.output.dir, command);
  const Outcome o = it->second(config, sim, out);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json manifest = {{"artifact", "rsjd"},
                   {"version", kVersion},
                   {"command", command},
                   {"config_hash", config_hash(config.raw)},
                   {"seed", config.sim.seed},
                   {"passed", o.passed},
                   {"summary", o.summary},
                   {"details", o.details},
                   {"outputs", out.entries()},
                   {"wall_clock", {{"started", started_at}, {"seconds", seconds}}}};
  const fs::path mp = out.dir() / (out.prefix() + "manifest.json");
  std::ofstream mf(mp, std::ios::binary | std::ios::trunc);
  mf << manifest.dump(2) << "\n";
  mf.close();
  if (!mf) throw IoError("cannot write " + mp.string());

  RunResult r;
  r.passed = o.passed;
  r.summary = o.summary;
  r.files = out.files();
  r.manifest = mp;
  return r;
}

}  // namespace rsjd::app
