#include "rsjd/app.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace rsjd;

namespace {

int fail(int code, const std::string& kind, const std::string& reason) {
  std::string line = reason;
  for (char& ch : line)
    if (ch == '\n') ch = ' ';
  std::cerr << kind << ": " << line << "\n";
  return code;
}

int list_models_command(const std::string& filter) {
  for (const auto& f : list_models(filter)) {
    std::cout << f.name << "  " << f.summary << "\n";
    for (const auto& p : f.params) std::cout << "    " << p.key << " (" << p.schema << "): " << p.description << "\n";
  }
  std::cout << "test functions:\n";
  for (const auto& t : list_test_functions())
    std::cout << "    " << t.name << (t.params.empty() ? "" : " [" + t.params + "]") << ": " << t.description << "\n";
  return app::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Simulation and certification toolkit for regime-switching jump diffusions", "rsjd"};
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string out_dir;
  bool expect_pass = false;
  std::vector<std::string> overrides;
  std::string filter;

  cli.add_option("--config", config_path, "config file (JSON)");
  cli.add_option("--seed", seed, "master seed, overrides run.seed");
  cli.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  cli.add_option("--out", out_dir, "output directory, overrides output.dir");
  cli.add_flag("--expect-pass", expect_pass, "exit 1 when the experiment does not pass");
  cli.add_option("--set", overrides, "override a config value: key.path=value")->take_all();

  for (const auto& name : app::commands()) cli.add_subcommand(name, "run the " + name + " experiment");
  auto* list = cli.add_subcommand("list-models", "list registered model families and test functions");
  list->add_option("filter", filter, "substring filter");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(app::exit_config, "config_error", e.what());
  }

  if (list->parsed()) return list_models_command(filter);
  const std::string command = cli.get_subcommands().front()->get_name();

  try {
    if (config_path.empty()) return fail(app::exit_config, "config_error", "--config: required");
    auto tree = app::read_config_file(config_path);
    for (const auto& o : overrides) app::apply_override(tree, o);
    if (seed) tree["run"]["seed"] = *seed;
    if (!out_dir.empty()) tree["output"]["dir"] = out_dir;
    const app::RunConfig config = app::load_config(tree);
    app::RunOptions options;
    options.workers = workers;
    options.expect_pass = expect_pass;
    const app::RunResult r = app::run(command, config, options);
    std::cout << command << ": " << (r.passed ? "pass" : "fail") << ": " << r.summary << "\n";
    std::cout << "manifest: " << r.manifest.string() << "\n";
    if (expect_pass && !r.passed) return app::exit_experiment_failed;
    return app::exit_ok;
  } catch (const ConfigError& e) {
    return fail(app::exit_config, "config_error", e.what());
  } catch (const app::IoError& e) {
    return fail(app::exit_io, "io_error", e.what());
  } catch (const ModelError& e) {
    return fail(app::exit_model, "model_error", e.what());
  } catch (const UnsupportedModel& e) {
    return fail(app::exit_model, "unsupported_model", e.what());
  } catch (const TruncationError& e) {
    return fail(app::exit_model, "truncation_error", e.what());
  } catch (const std::exception& e) {
    return fail(app::exit_runtime, "runtime_error", e.what());
  }
}
