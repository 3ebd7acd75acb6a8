#pragma once

// Config loading, experiment runners and output writing behind the command line.

#include "rsjd/coupling.hpp"
#include "rsjd/ergodicity.hpp"
#include "rsjd/families.hpp"
#include "rsjd/generator.hpp"
#include "rsjd/measure_change.hpp"
#include "rsjd/schema.hpp"
#include "rsjd/simulate.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsjd::app {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  exit_ok = 0,
  exit_experiment_failed = 1,
  exit_config = 2,
  exit_model = 3,
  exit_runtime = 4,
  exit_io = 5,
};

/// Uniform sample of (x, k) on [-radius, radius]^d x {0..max_regime}, or explicit points.
struct RegionSpec {
  double radius = 1.0;
  Regime max_regime = 0;
  std::size_t count = 100;
  std::vector<ProbePoint> points;  // used instead of sampling when non-empty
  std::uint64_t seed = 11;

  std::vector<ProbePoint> materialize(int dimension) const;
  std::string describe() const;
};

struct OutputSpec {
  std::string dir = "out";
  std::size_t retain_paths = 0;  // paths written as JSON lines
  std::size_t stride = 1;        // keep every stride-th grid point of retained paths
};

struct SimulateSpec {
  std::vector<double> checkpoints;  // defaults to an even grid of 10 points
  std::optional<double> average_from;
  bool freeze_regime = false;
};

struct CoupleSpec {
  std::vector<double> gaps{0.1, 0.05, 0.025};
  std::vector<double> checkpoints;  // defaults to an even grid of 10 points
  Point direction;                  // z0 = x0 + gap * direction / |direction|
};

struct GeneratorSpec {
  TestFunction function;
  RegionSpec region;
  GeneratorOptions options;
  bool dynkin = false;
};

struct KernelSpec {
  Regime regime = 0;
  double t = 1.0;
  Box box;
  SeriesOptions series;
  bool direct = false;
};

struct ChangeMeasureSpec {
  int kappa = 1;
  TestFunction function;
  bool direct = false;
  std::uint64_t chain_salt = 0;
};

struct DriftCheckSpec {
  TestFunction lyapunov;
  double alpha = 1.0;
  double gamma = 0.0;
  double tolerance = 1e-9;
  RegionSpec region;
  GeneratorOptions options;
};

struct DriftFitSpec {
  TestFunction lyapunov;
  RegionSpec region;
  DriftFitOptions fit;
  GeneratorOptions options;
};

struct LinearizedCheckSpec {
  double p = 1.0;
  double alpha = 0.1;
  RegimeFunction g = RegimeFunction::affine(1.0, 1.0);
  double radius = 100.0;
  Regime max_regime = 0;
  std::size_t directions = 8;
  IntegrationBudget budget;
};

struct ErgodicitySpec {
  std::vector<ProbePoint> starts;
  ConvergenceOptions options;
};

struct OuExampleSpec {
  double k1 = 1.0;
  std::optional<double> k2;  // computed from the quadrature jump constant when omitted
  Regime max_regime = 30;
  RegionSpec probes;
};

struct ValidateSpec {
  RegionSpec probes;
  ProbeOptions options;
};

struct RunConfig {
  json raw;  // the tree after overrides; hashed into the manifest
  json model_section;
  ModelSpec model;
  SimConfig sim;
  Point x0;
  Regime k0 = 0;
  OutputSpec output;

  std::optional<SimulateSpec> simulate;
  std::optional<CoupleSpec> couple;
  std::optional<GeneratorSpec> generator_test;
  std::optional<KernelSpec> kernel_series;
  std::optional<ChangeMeasureSpec> change_measure;
  std::optional<DriftCheckSpec> drift_check;
  std::optional<DriftFitSpec> drift_fit;
  std::optional<LinearizedCheckSpec> linearized_check;
  std::optional<ErgodicitySpec> ergodicity;
  std::optional<OuExampleSpec> ou_example;
  std::optional<ValidateSpec> validate;
};

/// Applies "a.b.c=value" overrides; the value is read as JSON when it parses, else as a string.
void apply_override(json& tree, const std::string& assignment);

/// Validates the whole tree (unknown keys are errors) and builds the model.
RunConfig load_config(const json& tree);
json read_config_file(const std::filesystem::path& path);

std::vector<std::string> commands();

struct RunOptions {
  unsigned workers = 1;
  bool expect_pass = false;
};

struct RunResult {
  bool passed = true;
  std::string summary;  // one line
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
};

/// Runs a subcommand and writes its outputs plus a manifest into config.output.dir.
RunResult run(const std::string& command, const RunConfig& config, const RunOptions& options);

/// FNV-1a 64 of the canonical dump of the tree, as 16 hex digits.
std::string config_hash(const json& tree);

}  // namespace rsjd::app
