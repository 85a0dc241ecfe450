#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fedcd {

/// Process exit codes of the command-line driver.
enum ExitCode : int { kExitOk = 0, kExitConfigError = 2, kExitRuntimeError = 3 };

/// `fedcd run`: one simulation, rounds.csv + summary.json.
int cmd_run(const std::filesystem::path& config, const std::vector<std::string>& overrides,
            std::ostream& log);

/// `fedcd compare`: same partition and seed under FedCD and FedAvg, plus
/// compare.json holding per-archetype accuracy deltas.
int cmd_compare(const std::filesystem::path& config, const std::vector<std::string>& overrides,
                std::ostream& log);

/// `fedcd sweep`: one run per value of bias, quantization_bits or
/// score_window, plus sweep.csv keyed by the swept value.
int cmd_sweep(const std::filesystem::path& config, const std::string& param,
              const std::vector<std::string>& values, const std::vector<std::string>& overrides,
              std::ostream& log);

}  // namespace fedcd
