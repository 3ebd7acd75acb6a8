#include "rsjd/app.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rsjd::app {

using namespace rsjd::schema;

namespace {

std::vector<double> checkpoint_list(const json& v, double horizon, const std::string& path) {
  // a list of times, or {"count": n} for an even grid ending at T
  std::vector<double> out;
  if (v.is_object()) {
    allow_keys(v, {"count"}, path);
    const auto n = integer_at_least(require(v, "count", path), 1, join(path, "count"));
    for (long long i = 1; i <= n; ++i) out.push_back(horizon * static_cast<double>(i) / static_cast<double>(n));
    return out;
  }
  out = numbers(v, path);
  if (out.empty()) throw ConfigError(path, "needs at least one checkpoint");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] <= 0.0 || out[i] > horizon) throw ConfigError(index(path, i), "must lie in (0, T]");
    if (i > 0 && out[i] <= out[i - 1]) throw ConfigError(index(path, i), "checkpoints must increase");
  }
  return out;
}

std::vector<double> even_grid(double horizon, int n) {
  std::vector<double> out;
  for (int i = 1; i <= n; ++i) out.push_back(horizon * i / n);
  return out;
}

ProbePoint probe_point(const json& v, int dim, const std::string& path) {
  allow_keys(v, {"x", "k"}, path);
  ProbePoint p;
  p.x = point(require(v, "x", path), join(path, "x"));
  if (p.x.size() != dim) throw ConfigError(join(path, "x"), "expected " + std::to_string(dim) + " coordinates");
  if (const json* k = find(v, "k")) p.k = static_cast<Regime>(integer_at_least(*k, 0, join(path, "k")));
  return p;
}

RegionSpec region(const json& v, int dim, const std::string& path) {
  allow_keys(v, {"radius", "max_regime", "count", "seed", "points"}, path);
  RegionSpec r;
  if (const json* p = find(v, "points")) {
    if (!p->is_array() || p->empty()) throw ConfigError(join(path, "points"), "expected a non-empty array");
    for (std::size_t i = 0; i < p->size(); ++i) r.points.push_back(probe_point((*p)[i], dim, index(join(path, "points"), i)));
    return r;
  }
  r.radius = positive(require(v, "radius", path), join(path, "radius"));
  if (const json* m = find(v, "max_regime")) r.max_regime = static_cast<Regime>(integer_at_least(*m, 0, join(path, "max_regime")));
  if (const json* c = find(v, "count")) r.count = static_cast<std::size_t>(integer_at_least(*c, 1, join(path, "count")));
  if (const json* s = find(v, "seed")) r.seed = static_cast<std::uint64_t>(integer_at_least(*s, 0, join(path, "seed")));
  return r;
}

IntegrationBudget budget(const json& v, const std::string& path) {
  allow_keys(v, {"samples", "quadrature", "nodes", "minimum_samples"}, path);
  IntegrationBudget b;
  if (const json* s = find(v, "samples")) b.samples = static_cast<std::size_t>(integer_at_least(*s, 1, join(path, "samples")));
  if (const json* q = find(v, "quadrature")) b.prefer_quadrature = boolean(*q, join(path, "quadrature"));
  if (const json* n = find(v, "nodes")) b.quadrature_nodes = static_cast<int>(integer_at_least(*n, 2, join(path, "nodes")));
  if (const json* m = find(v, "minimum_samples"))
    b.minimum_samples = static_cast<std::size_t>(integer_at_least(*m, 1, join(path, "minimum_samples")));
  return b;
}

GeneratorOptions generator_options(const json& section, const std::string& path) {
  GeneratorOptions o;
  if (const json* b = find(section, "budget")) o.budget = budget(*b, join(path, "budget"));
  if (const json* f = find(section, "finite_difference")) o.finite_difference = boolean(*f, join(path, "finite_difference"));
  return o;
}

void parse_run(RunConfig& c, const json& run) {
  const std::string path = "run";
  allow_keys(run, {"T", "dt", "paths", "seed", "explosion_radius", "regime_ceiling", "scheme", "truncation", "x0", "k0"},
             path);
  SimConfig& s = c.sim;
  s.horizon = positive(require(run, "T", path), "run.T");
  s.dt = positive(require(run, "dt", path), "run.dt");
  if (!(s.dt < s.horizon)) throw ConfigError("run.dt", "must be smaller than run.T");
  s.paths = 1000;
  if (const json* n = find(run, "paths")) s.paths = static_cast<std::size_t>(integer_at_least(*n, 1, "run.paths"));
  if (const json* v = find(run, "seed")) s.seed = static_cast<std::uint64_t>(integer_at_least(*v, 0, "run.seed"));
  if (const json* v = find(run, "explosion_radius")) s.explosion_radius = positive(*v, "run.explosion_radius");
  if (const json* v = find(run, "regime_ceiling"))
    s.regime_ceiling = static_cast<Regime>(integer_at_least(*v, 1, "run.regime_ceiling"));
  if (const json* v = find(run, "scheme")) {
    const std::string name = string(*v, "run.scheme");
    if (name == "grid")
      s.clock = ClockScheme::grid_integrated;
    else if (name == "thinning")
      s.clock = ClockScheme::thinning;
    else
      throw ConfigError("run.scheme", "expected \"grid\" or \"thinning\"");
  }
  if (const json* v = find(run, "truncation")) s.truncation = positive(*v, "run.truncation");
  c.x0 = Point::Zero(c.model.dimension);
  if (const json* v = find(run, "x0")) {
    c.x0 = point(*v, "run.x0");
    if (c.x0.size() != c.model.dimension) throw ConfigError("run.x0", "expected " + std::to_string(c.model.dimension) + " coordinates");
  }
  if (const json* v = find(run, "k0")) c.k0 = static_cast<Regime>(integer_at_least(*v, 0, "run.k0"));
  if (!(s.explosion_radius > c.x0.norm())) throw ConfigError("run.explosion_radius", "must exceed |x0|");
  if (!(s.regime_ceiling > c.k0)) throw ConfigError("run.regime_ceiling", "must exceed k0");
  if (s.clock == ClockScheme::thinning && !c.model.growth_bound)
    throw ConfigError("run.scheme", "thinning needs the growth constant H");
}

void parse_output(RunConfig& c, const json& v) {
  allow_keys(v, {"dir", "retain_paths", "stride"}, "output");
  if (const json* d = find(v, "dir")) c.output.dir = string(*d, "output.dir");
  if (const json* r = find(v, "retain_paths"))
    c.output.retain_paths = static_cast<std::size_t>(integer_at_least(*r, 0, "output.retain_paths"));
  if (const json* s = find(v, "stride")) c.output.stride = static_cast<std::size_t>(integer_at_least(*s, 1, "output.stride"));
}

SimulateSpec parse_simulate(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"checkpoints", "average_from", "freeze_regime"}, path);
  SimulateSpec s;
  s.checkpoints = even_grid(c.sim.horizon, 10);
  if (const json* cp = find(v, "checkpoints")) s.checkpoints = checkpoint_list(*cp, c.sim.horizon, join(path, "checkpoints"));
  if (const json* a = find(v, "average_from")) {
    s.average_from = nonnegative(*a, join(path, "average_from"));
    if (*s.average_from >= c.sim.horizon) throw ConfigError(join(path, "average_from"), "must be smaller than run.T");
  }
  if (const json* f = find(v, "freeze_regime")) s.freeze_regime = boolean(*f, join(path, "freeze_regime"));
  return s;
}

CoupleSpec parse_couple(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"gaps", "checkpoints", "direction"}, path);
  CoupleSpec s;
  s.checkpoints = even_grid(c.sim.horizon, 10);
  if (const json* g = find(v, "gaps")) {
    s.gaps = numbers(*g, join(path, "gaps"));
    if (s.gaps.empty()) throw ConfigError(join(path, "gaps"), "needs at least one gap");
    for (std::size_t i = 0; i < s.gaps.size(); ++i)
      if (s.gaps[i] < 0.0) throw ConfigError(index(join(path, "gaps"), i), "must be nonnegative");
  }
  if (const json* cp = find(v, "checkpoints")) s.checkpoints = checkpoint_list(*cp, c.sim.horizon, join(path, "checkpoints"));
  s.direction = Point::Zero(c.model.dimension);
  s.direction(0) = 1.0;
  if (const json* d = find(v, "direction")) {
    s.direction = point(*d, join(path, "direction"));
    if (s.direction.size() != c.model.dimension || !(s.direction.norm() > 0.0))
      throw ConfigError(join(path, "direction"), "expected a nonzero vector of dimension d");
  }
  s.direction /= s.direction.norm();
  return s;
}

GeneratorSpec parse_generator(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"function", "region", "budget", "finite_difference", "dynkin"}, path);
  GeneratorSpec s;
  s.function = parse_test_function(require(v, "function", path), c.model.dimension, join(path, "function"));
  s.region = region(require(v, "region", path), c.model.dimension, join(path, "region"));
  s.options = generator_options(v, path);
  if (const json* d = find(v, "dynkin")) s.dynkin = boolean(*d, join(path, "dynkin"));
  if (!s.function.smooth)
    throw ConfigError(join(path, "function"), "the generator needs a smooth test function");
  return s;
}

KernelSpec parse_kernel(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"regime", "t", "box", "terms", "samples", "seed", "direct"}, path);
  KernelSpec s;
  if (const json* r = find(v, "regime")) s.regime = static_cast<Regime>(integer_at_least(*r, 0, join(path, "regime")));
  s.t = positive(require(v, "t", path), join(path, "t"));
  const json& box = require(v, "box", path);
  const std::string bp = join(path, "box");
  allow_keys(box, {"lo", "hi"}, bp);
  s.box.lo = point(require(box, "lo", bp), join(bp, "lo"));
  s.box.hi = point(require(box, "hi", bp), join(bp, "hi"));
  if (s.box.lo.size() != c.model.dimension || s.box.hi.size() != c.model.dimension)
    throw ConfigError(bp, "box corners must have dimension d");
  if ((s.box.hi.array() < s.box.lo.array()).any()) throw ConfigError(join(bp, "hi"), "must be >= lo");
  if (const json* n = find(v, "terms")) s.series.terms = static_cast<int>(integer_at_least(*n, 1, join(path, "terms")));
  if (const json* n = find(v, "samples"))
    s.series.samples = static_cast<std::size_t>(integer_at_least(*n, 1, join(path, "samples")));
  s.series.seed = c.sim.seed;
  if (const json* n = find(v, "seed")) s.series.seed = static_cast<std::uint64_t>(integer_at_least(*n, 0, join(path, "seed")));
  if (const json* d = find(v, "direct")) s.direct = boolean(*d, join(path, "direct"));
  if (s.direct && s.t > c.sim.horizon + 1e-12) throw ConfigError(join(path, "t"), "direct simulation needs t <= run.T");
  return s;
}

ChangeMeasureSpec parse_change_measure(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"kappa", "function", "direct", "chain_salt"}, path);
  ChangeMeasureSpec s;
  s.kappa = static_cast<int>(integer_at_least(require(v, "kappa", path), 1, join(path, "kappa")));
  s.function = parse_test_function(require(v, "function", path), c.model.dimension, join(path, "function"));
  if (!s.function.bounded) throw ConfigError(join(path, "function"), "the weighted estimator needs a bounded f");
  if (const json* d = find(v, "direct")) s.direct = boolean(*d, join(path, "direct"));
  if (const json* d = find(v, "chain_salt"))
    s.chain_salt = static_cast<std::uint64_t>(integer_at_least(*d, 0, join(path, "chain_salt")));
  return s;
}

DriftCheckSpec parse_drift_check(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"lyapunov", "alpha", "gamma", "tolerance", "region", "budget", "finite_difference"}, path);
  DriftCheckSpec s;
  s.lyapunov = parse_test_function(require(v, "lyapunov", path), c.model.dimension, join(path, "lyapunov"));
  s.alpha = positive(require(v, "alpha", path), join(path, "alpha"));
  s.gamma = nonnegative(require(v, "gamma", path), join(path, "gamma"));
  if (const json* t = find(v, "tolerance")) s.tolerance = nonnegative(*t, join(path, "tolerance"));
  s.region = region(require(v, "region", path), c.model.dimension, join(path, "region"));
  s.options = generator_options(v, path);
  return s;
}

DriftFitSpec parse_drift_fit(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"lyapunov", "region", "gamma_cap", "alpha_min", "alpha_max", "grid_points", "budget", "finite_difference"},
             path);
  DriftFitSpec s;
  s.lyapunov = parse_test_function(require(v, "lyapunov", path), c.model.dimension, join(path, "lyapunov"));
  s.region = region(require(v, "region", path), c.model.dimension, join(path, "region"));
  if (const json* x = find(v, "gamma_cap")) s.fit.gamma_cap = positive(*x, join(path, "gamma_cap"));
  if (const json* x = find(v, "alpha_min")) s.fit.alpha_min = positive(*x, join(path, "alpha_min"));
  if (const json* x = find(v, "alpha_max")) s.fit.alpha_max = positive(*x, join(path, "alpha_max"));
  if (s.fit.alpha_max <= s.fit.alpha_min) throw ConfigError(join(path, "alpha_max"), "must exceed alpha_min");
  if (const json* x = find(v, "grid_points"))
    s.fit.grid_points = static_cast<std::size_t>(integer_at_least(*x, 2, join(path, "grid_points")));
  s.options = generator_options(v, path);
  if (s.region.points.empty() && s.region.count < 10) throw ConfigError(join(path, "region.count"), "must be >= 10");
  if (!s.region.points.empty() && s.region.points.size() < 10) throw ConfigError(join(path, "region.points"), "needs >= 10 points");
  return s;
}

LinearizedCheckSpec parse_linearized(const RunConfig&, const json& v, const std::string& path) {
  allow_keys(v, {"p", "alpha", "g", "radius", "max_regime", "directions", "budget"}, path);
  LinearizedCheckSpec s;
  s.p = number(require(v, "p", path), join(path, "p"));
  if (!(s.p > 0.0 && s.p < 2.0)) throw ConfigError(join(path, "p"), "must lie in (0, 2)");
  s.alpha = positive(require(v, "alpha", path), join(path, "alpha"));
  if (const json* g = find(v, "g")) s.g = RegimeFunction::parse(*g, join(path, "g"));
  if (const json* r = find(v, "radius")) s.radius = positive(*r, join(path, "radius"));
  s.max_regime = static_cast<Regime>(integer_at_least(require(v, "max_regime", path), 0, join(path, "max_regime")));
  if (const json* d = find(v, "directions"))
    s.directions = static_cast<std::size_t>(integer_at_least(*d, 1, join(path, "directions")));
  if (const json* b = find(v, "budget")) s.budget = budget(*b, join(path, "budget"));
  return s;
}

ErgodicitySpec parse_ergodicity(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"starts", "checkpoints", "bins", "reference", "certified", "fit_floor"}, path);
  ErgodicitySpec s;
  const json& starts = require(v, "starts", path);
  if (!starts.is_array() || starts.empty()) throw ConfigError(join(path, "starts"), "expected a non-empty array");
  for (std::size_t i = 0; i < starts.size(); ++i)
    s.starts.push_back(probe_point(starts[i], c.model.dimension, index(join(path, "starts"), i)));
  s.options.checkpoints = checkpoint_list(require(v, "checkpoints", path), c.sim.horizon, join(path, "checkpoints"));
  if (const json* b = find(v, "bins")) {
    const std::string bp = join(path, "bins");
    allow_keys(*b, {"lo", "hi", "count", "max_regime"}, bp);
    if (const json* x = find(*b, "lo")) s.options.bins.lo = number(*x, join(bp, "lo"));
    if (const json* x = find(*b, "hi")) s.options.bins.hi = number(*x, join(bp, "hi"));
    if (!(s.options.bins.hi > s.options.bins.lo)) throw ConfigError(join(bp, "hi"), "must exceed lo");
    if (const json* x = find(*b, "count")) s.options.bins.count = static_cast<int>(integer_at_least(*x, 1, join(bp, "count")));
    if (const json* x = find(*b, "max_regime"))
      s.options.bins.max_regime = static_cast<Regime>(integer_at_least(*x, 0, join(bp, "max_regime")));
  }
  if (const json* r = find(v, "reference")) {
    const std::string rp = join(path, "reference");
    allow_keys(*r, {"horizon", "burn_in", "spacing"}, rp);
    if (const json* x = find(*r, "horizon")) s.options.reference_horizon = positive(*x, join(rp, "horizon"));
    if (const json* x = find(*r, "burn_in")) s.options.reference_burn_in = nonnegative(*x, join(rp, "burn_in"));
    if (const json* x = find(*r, "spacing")) s.options.reference_spacing = positive(*x, join(rp, "spacing"));
    if (!(s.options.reference_horizon > s.options.reference_burn_in))
      throw ConfigError(join(rp, "horizon"), "must exceed burn_in");
  }
  if (const json* x = find(v, "certified")) s.options.certified = boolean(*x, join(path, "certified"));
  if (const json* x = find(v, "fit_floor")) s.options.fit_floor = nonnegative(*x, join(path, "fit_floor"));
  return s;
}

OuExampleSpec parse_ou_example(const RunConfig& c, const json& v, const std::string& path) {
  if (c.model.family != "coupled-ou") throw ConfigError("model.family", "ou-example needs the coupled-ou family");
  allow_keys(v, {"K1", "K2", "max_regime", "probes"}, path);
  OuExampleSpec s;
  s.k1 = positive(require(v, "K1", path), join(path, "K1"));
  if (const json* k = find(v, "K2")) s.k2 = positive(*k, join(path, "K2"));
  s.max_regime = static_cast<Regime>(integer_at_least(require(v, "max_regime", path), 0, join(path, "max_regime")));
  s.probes = region(require(v, "probes", path), 1, join(path, "probes"));
  return s;
}

ValidateSpec parse_validate(const RunConfig& c, const json& v, const std::string& path) {
  allow_keys(v, {"probes", "tolerance", "budget"}, path);
  ValidateSpec s;
  s.probes = region(require(v, "probes", path), c.model.dimension, join(path, "probes"));
  if (const json* t = find(v, "tolerance")) s.options.tolerance = nonnegative(*t, join(path, "tolerance"));
  if (const json* b = find(v, "budget")) s.options.budget = budget(*b, join(path, "budget"));
  return s;
}

}  // namespace

std::vector<ProbePoint> RegionSpec::materialize(int dimension) const {
  if (!points.empty()) return points;
  return sample_region(dimension, radius, max_regime, count, seed);
}

std::string RegionSpec::describe() const {
  if (!points.empty()) return std::to_string(points.size()) + " listed points";
  std::ostringstream s;
  s << count << " points uniform on |x_i| <= " << radius << ", k <= " << max_regime;
  return s.str();
}

std::vector<std::string> commands() {
  return {"simulate",       "couple",     "generator-test",   "kernel-series", "change-measure", "drift-check",
          "drift-fit",      "linearized-check", "ergodicity", "ou-example",    "validate"};
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &tree;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json tree = json::parse(in, nullptr, false, true);
  if (tree.is_discarded()) throw ConfigError(path.string(), "not valid JSON");
  return tree;
}

RunConfig load_config(const json& tree) {
  allow_keys(tree, {"model", "run", "output", "experiments"}, "");
  RunConfig c;
  c.raw = tree;
  c.model_section = require(tree, "model", "");
  c.model = build_model(c.model_section, "model");
  parse_run(c, require(tree, "run", ""));
  if (const json* o = find(tree, "output")) parse_output(c, *o);
  const json* ex = find(tree, "experiments");
  if (!ex) return c;
  allow_keys(*ex, {"simulate", "couple", "generator-test", "kernel-series", "change-measure", "drift-check", "drift-fit",
                   "linearized-check", "ergodicity", "ou-example", "validate"},
             "experiments");
  auto section = [&](const char* name, auto parse, auto& slot) {
    if (const json* v = find(*ex, name)) slot = parse(c, *v, join("experiments", name));
  };
  section("simulate", parse_simulate, c.simulate);
  section("couple", parse_couple, c.couple);
  section("generator-test", parse_generator, c.generator_test);
  section("kernel-series", parse_kernel, c.kernel_series);
  section("change-measure", parse_change_measure, c.change_measure);
  section("drift-check", parse_drift_check, c.drift_check);
  section("drift-fit", parse_drift_fit, c.drift_fit);
  section("linearized-check", parse_linearized, c.linearized_check);
  section("ergodicity", parse_ergodicity, c.ergodicity);
  section("ou-example", parse_ou_example, c.ou_example);
  section("validate", parse_validate, c.validate);
  return c;
}

std::string config_hash(const json& tree) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tree.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rsjd::app
