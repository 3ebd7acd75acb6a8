#include "rsjd/app.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rsjd;
using app::json;

namespace {

json base_tree() {
  return json::parse(R"({
    "model": {
      "family": "coupled-ou",
      "params": {"alpha": {"values": [-1, -2]}, "sigma": 1, "beta": 0.5},
      "jumps": {"law": "laplace", "mass": 1, "scale": 1},
      "rates": {"kappa": 1, "entries": {"+1": 1, "-1": 1}, "max_regime": 1}
    },
    "run": {"T": 1, "dt": 0.05, "paths": 50, "seed": 3, "x0": [0.5]},
    "experiments": {"simulate": {"checkpoints": [0.5, 1.0]}}
  })");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a missing time step is reported by path") {
  auto t = base_tree();
  t["run"].erase("dt");
  try {
    (void)app::load_config(t);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "run.dt: required");
    CHECK(e.path() == "run.dt");
  }
}

TEST_CASE("unknown keys are rejected") {
  auto t = base_tree();
  t["run"]["dtt"] = 0.1;
  CHECK_THROWS_AS(app::load_config(t), ConfigError);
  auto u = base_tree();
  u["experiments"]["simulate"]["bogus"] = true;
  CHECK_THROWS_AS(app::load_config(u), ConfigError);
  auto v = base_tree();
  v["experiments"]["not-a-command"] = json::object();
  CHECK_THROWS_AS(app::load_config(v), ConfigError);
}

TEST_CASE("values are range checked") {
  auto t = base_tree();
  t["run"]["dt"] = -0.1;
  CHECK_THROWS_AS(app::load_config(t), ConfigError);
  auto u = base_tree();
  u["run"]["explosion_radius"] = 0.1;
  CHECK_THROWS_AS(app::load_config(u), ConfigError);
  auto v = base_tree();
  v["run"]["scheme"] = "leapfrog";
  CHECK_THROWS_AS(app::load_config(v), ConfigError);
}

TEST_CASE("overrides parse JSON and fall back to strings") {
  auto t = base_tree();
  app::apply_override(t, "run.paths=123");
  app::apply_override(t, "output.dir=some/where");
  app::apply_override(t, "run.x0=[2.5]");
  CHECK(t["run"]["paths"] == 123);
  CHECK(t["output"]["dir"] == "some/where");
  const auto cfg = app::load_config(t);
  CHECK(cfg.sim.paths == 123);
  CHECK(cfg.x0(0) == 2.5);
  CHECK(cfg.output.dir == "some/where");
  CHECK_THROWS_AS(app::apply_override(t, "no-equals-sign"), ConfigError);
}

TEST_CASE("families and commands are registered") {
  const auto all = list_models();
  REQUIRE(all.size() >= 2);
  bool has_ou = false;
  for (const auto& f : all) has_ou = has_ou || f.name == "coupled-ou";
  CHECK(has_ou);
  CHECK(list_models("coupled").size() == 1);
  CHECK(list_models("no-such-family").empty());
  const auto cmds = app::commands();
  for (const char* c : {"simulate", "couple", "generator-test", "kernel-series", "change-measure", "drift-check",
                        "drift-fit", "linearized-check", "ergodicity", "ou-example", "validate"})
    CHECK(std::find(cmds.begin(), cmds.end(), c) != cmds.end());
  CHECK_FALSE(list_test_functions().empty());
}

TEST_CASE("a run writes a manifest and reproduces its files") {
  const auto dir = std::filesystem::temp_directory_path() / "rsjd_config_test";
  std::filesystem::remove_all(dir);
  auto t = base_tree();
  t["output"]["dir"] = dir.string();
  const auto cfg = app::load_config(t);
  const auto r1 = app::run("simulate", cfg, {});
  REQUIRE(std::filesystem::exists(r1.manifest));
  const auto manifest = json::parse(slurp(r1.manifest));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config_hash"] == app::config_hash(cfg.raw));
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  std::vector<std::string> first;
  for (const auto& f : r1.files) first.push_back(slurp(f));
  app::RunOptions two;
  two.workers = 2;
  const auto r2 = app::run("simulate", cfg, two);
  REQUIRE(r2.files.size() == r1.files.size());
  for (std::size_t i = 0; i < r2.files.size(); ++i) CHECK(slurp(r2.files[i]) == first[i]);
  CHECK_THROWS_AS(app::run("drift-check", cfg, {}), ConfigError);
  std::filesystem::remove_all(dir);
}
