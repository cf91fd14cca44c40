#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distdiff/cli.hpp"

namespace {

distdiff::vec parse_values(const std::string& csv) {
  distdiff::vec out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed robust exact differentiator simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::string param;
  std::string values_csv;
  int samples = 5000;
  std::uint64_t seed = 1;
  bool json = false;

  CLI::App* run_cmd = app.add_subcommand("run", "execute a scenario and write run artifacts");
  run_cmd->add_option("--config", config, "scenario JSON path")->required();
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_flag("--json", json, "print machine-readable JSON to stdout");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "re-run a scenario over dt or eps values");
  sweep_cmd->add_option("--config", config, "scenario JSON path")->required();
  sweep_cmd->add_option("--param", param, "dt or eps")->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated list of values")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_flag("--json", json, "print machine-readable JSON to stdout");

  CLI::App* verify_cmd = app.add_subcommand("verify-gains", "check the gain-selection conditions");
  verify_cmd->add_option("--config", config, "scenario JSON path")->required();
  verify_cmd->add_option("--samples", samples, "sphere sample count");
  verify_cmd->add_option("--seed", seed, "sphere sample seed");
  verify_cmd->add_option("--out", out_dir, "optional output directory for verify.json");
  verify_cmd->add_flag("--json", json, "print machine-readable JSON to stdout");

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the built-in property suite");
  selftest_cmd->add_flag("--json", json, "print machine-readable JSON to stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return distdiff::cmd_run(config, out_dir, json);
    if (sweep_cmd->parsed()) {
      distdiff::vec values;
      try {
        values = parse_values(values_csv);
      } catch (const std::exception&) {
        std::cerr << "config error: --values must be a comma-separated number list\n";
        return distdiff::exit_config_error;
      }
      return distdiff::cmd_sweep(config, param, values, out_dir, json);
    }
    if (verify_cmd->parsed()) {
      const std::string verify_out = verify_cmd->count("--out") ? out_dir : std::string{};
      return distdiff::cmd_verify_gains(config, samples, seed, verify_out, json);
    }
    if (selftest_cmd->parsed()) return distdiff::cmd_selftest(json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return distdiff::exit_config_error;
  }
  return distdiff::exit_config_error;
}
