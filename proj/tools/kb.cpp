#include "kbi/config.hpp"
#include "kbi/csv.hpp"
#include "kbi/errors.hpp"
#include "kbi/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericError = 2;

int run(const std::string& path, const std::vector<std::string>& overrides, const std::string& output) {
  const kbi::ExperimentConfig config = kbi::load_config(path, overrides);
  const std::string csv_path = !output.empty() ? output
                               : !config.output.empty() ? config.output
                                                        : config.experiment + ".csv";
  const unsigned threads = kbi::thread_count();
  const kbi::ExperimentOutput result = kbi::run_experiment(config, threads);

  const auto parent = std::filesystem::path(csv_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream csv(csv_path);
  if (!csv) throw kbi::ConfigError("output", "cannot write '" + csv_path + "'");
  kbi::write_experiment_csv(csv, config.hash(), result.rows);

  nlohmann::json manifest = {{"config_hash", config.hash()},
                             {"config", config.raw},
                             {"experiment", config.experiment},
                             {"seed", config.seed},
                             {"replicates", config.replicates},
                             {"rows", result.rows.size()},
                             {"csv", csv_path},
                             {"summary", result.summary}};
  std::ofstream(kbi::manifest_path(csv_path)) << manifest.dump(2) << '\n';
  std::cout << "wrote " << result.rows.size() << " rows to " << csv_path << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel Bayesian inference experiments"};
  app.require_subcommand(1);

  std::string run_path;
  std::string run_output;
  std::vector<std::string> overrides;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write CSV plus manifest");
  run_cmd->add_option("config", run_path, "Experiment config (JSON)")->required();
  run_cmd->add_option("--set", overrides, "Override a dotted config path: key=value")->take_all();
  run_cmd->add_option("-o,--output", run_output, "CSV path (defaults to the config's output)");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("config", validate_path, "Experiment config (JSON)")->required();
  validate_cmd->add_option("--set", overrides, "Override a dotted config path: key=value")->take_all();

  auto* list_cmd = app.add_subcommand("list-experiments", "Print the known experiment kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*list_cmd) {
      for (const auto& k : kbi::experiment_kinds()) std::cout << k << '\n';
      return kOk;
    }
    if (*validate_cmd) {
      kbi::load_config(validate_path, overrides);
      std::cout << "ok\n";
      return kOk;
    }
    return run(run_path, overrides, run_output);
  } catch (const kbi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kbi::InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kbi::CapabilityError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kbi::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericError;
  }
}
