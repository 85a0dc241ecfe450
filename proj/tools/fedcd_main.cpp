// Command-line driver: fedcd run | compare | sweep.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedcd/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"FedCD / FedAvg federated learning simulator"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run one simulation");
  run->add_option("config", config, "Experiment file (JSON)")->required();
  run->allow_extras();

  auto* compare = app.add_subcommand("compare", "Run FedCD and FedAvg on the same partition");
  compare->add_option("config", config, "Experiment file (JSON)")->required();
  compare->allow_extras();

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "One run per value of a parameter");
  sweep->add_option("config", config, "Experiment file (JSON)")->required();
  sweep->add_option("--param", param, "bias | quantization_bits | score_window")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fedcd::kExitConfigError;
  }

  if (*run) return fedcd::cmd_run(config, run->remaining(), std::cerr);
  if (*compare) return fedcd::cmd_compare(config, compare->remaining(), std::cerr);
  return fedcd::cmd_sweep(config, param, values, sweep->remaining(), std::cerr);
}
