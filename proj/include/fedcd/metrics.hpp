#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcd/engine.hpp"

namespace fedcd {

/// Column order of the per-round CSV.
inline constexpr const char* kRoundCsvHeader =
    "round,device_id,archetype,best_model_id,best_score,test_accuracy,"
    "alive_models_device,alive_models_total,score_stddev,bytes_uplinked,wall_ms";

/// Oscillation window and threshold used to call a run converged.
inline constexpr std::size_t kConvergenceWindow = 10;
inline constexpr double kConvergenceThreshold = 0.01;

/// Fixed six-decimal rendering used for every real in the CSV.
std::string format_fixed(double v);
/// v as it reads back from the CSV.
double csv_round(double v);

/// Mean over devices and over the last `window` round-to-round steps of
/// |perf[r] - perf[r-1]|. `series[r][d]` is device d's performance in round r.
double oscillation(const std::vector<std::vector<double>>& series, std::size_t window);

/// Mean over devices of the population stddev of each device's held scores.
double score_stddev_avg(const ScoreMatrix& scores);

/// Per-round device performance in device-id order, rounded as written to
/// the CSV.
std::vector<std::vector<double>> performance_series(std::span<const RoundMetrics> rounds);

/// First round r such that the trailing-window oscillation is below the
/// threshold for every round from r to the end. nullopt if never.
std::optional<std::size_t> rounds_to_convergence(
    const std::vector<std::vector<double>>& series,
    std::size_t window = kConvergenceWindow, double threshold = kConvergenceThreshold);

void write_round_csv(const std::filesystem::path& path, std::span<const RoundMetrics> rounds);

/// Parsed CSV row, for tooling and tests.
struct CsvRow {
  std::size_t round, device_id, archetype, best_model_id;
  double best_score, test_accuracy;
  std::size_t alive_models_device, alive_models_total;
  double score_stddev;
  std::size_t bytes_uplinked;
  double wall_ms;
};
std::vector<CsvRow> read_round_csv(const std::filesystem::path& path);

/// Summary document: config echo, final per-archetype accuracy, convergence
/// round, final live model count and uplink total, plus a few extras.
nlohmann::ordered_json summarize_run(const nlohmann::ordered_json& config_echo,
                                     std::span<const RoundMetrics> rounds);

void write_summary(const std::filesystem::path& path, const nlohmann::ordered_json& summary);

}  // namespace fedcd
