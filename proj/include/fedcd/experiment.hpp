#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcd/data.hpp"
#include "fedcd/engine.hpp"

namespace fedcd {

/// Invalid experiment definition. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class ArchetypeScheme { kHierarchical, kHypergeometric };

struct DataConfig {
  ArchetypeScheme scheme = ArchetypeScheme::kHierarchical;
  std::size_t num_classes = 10;
  std::size_t feature_dim = 16;
  std::size_t per_class = 1000;
  double spread = 2.0;
  /// Optional comma-separated dataset replacing the synthetic generator.
  std::string csv_path;
  std::size_t devices_per_archetype = 3;
  std::size_t samples_per_device = 600;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::size_t num_meta = 2;
  double bias_min = 0.6;
  double bias_max = 0.7;
  std::int64_t hypergeom_population = 110;
  std::vector<std::int64_t> hypergeom_successes{5, 25, 45, 65, 85, 105};
  std::int64_t hypergeom_draws = 10;

  std::size_t archetype_count() const;
  std::size_t device_count() const { return archetype_count() * devices_per_archetype; }
};

struct OutputConfig {
  std::string dir = "fedcd_out";
  /// Off by default so that repeated runs write byte-identical CSVs.
  bool record_wall_time = false;
  bool parallel = true;
};

struct ExperimentConfig {
  SimulationConfig sim;
  DataConfig data;
  OutputConfig output;

  bool operator==(const ExperimentConfig& o) const { return to_json() == o.to_json(); }

  nlohmann::ordered_json to_json() const;
  /// Strict: unknown sections or keys raise ConfigError naming them.
  static ExperimentConfig from_json(const nlohmann::ordered_json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Applies a `key=value` override to a config document. Keys are either
/// `section.name` or a bare name that is unique across sections. Values are
/// parsed as JSON when possible, otherwise taken as strings.
void apply_override(nlohmann::ordered_json& doc, const std::string& key, const std::string& value);

/// Splits `key=value` (leading dashes stripped).
std::pair<std::string, std::string> split_override(const std::string& arg);

/// Global dataset per config (synthetic or CSV), deterministic in the seed.
GlobalDataset make_dataset(const ExperimentConfig& cfg);
std::vector<DeviceShard> make_shards(const ExperimentConfig& cfg);

struct RunResult {
  std::vector<RoundMetrics> rounds;
  std::vector<std::uint64_t> shard_hashes;
  nlohmann::ordered_json summary;
};

/// Runs all rounds. The shards argument lets comparisons reuse one partition.
RunResult run_experiment(const ExperimentConfig& cfg, std::vector<DeviceShard> shards);
RunResult run_experiment(const ExperimentConfig& cfg);

/// Writes rounds.csv and summary.json into `dir` (created if needed).
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

/// Effective output directory: $FEDCD_OUTPUT_ROOT/<output.dir> when the
/// variable is set, else output.dir.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

}  // namespace fedcd
