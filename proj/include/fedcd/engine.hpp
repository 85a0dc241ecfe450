#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcd/data.hpp"
#include "fedcd/mlp.hpp"
#include "fedcd/quantize.hpp"
#include "fedcd/rng.hpp"

namespace fedcd {

enum class Strategy { kFedCD, kFedAvg };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

/// How per-device work inside a round is scheduled. Both produce identical
/// results; the serial path is the reference.
enum class Execution { kSerial, kParallel };

struct SimulationConfig {
  std::size_t n_devices = 30;
  std::size_t devices_per_round = 15;
  std::size_t total_rounds = 45;
  /// 1-based round numbers after which every live model is cloned.
  std::vector<std::size_t> milestones{5, 15, 25, 30};
  std::size_t score_window = 3;
  std::size_t late_prune_round = 20;
  double late_prune_threshold = 0.3;
  double score_noise_std = 0.0;
  QuantizationSpec quantization;
  TrainerParams trainer;
  std::vector<std::size_t> hidden_layers{32};
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::kFedCD;

  void validate() const;
  bool is_milestone(std::size_t round) const;
  MlpSpec model_spec(std::size_t input_dim, std::size_t num_classes) const;
};

enum class ModelStatus {
  kAlive,
  kDeleted,
  /// Id reserved by a milestone doubling whose would-be parent was dead.
  kNotCloned,
};

struct ModelEntry {
  ModelWeights weights;
  std::optional<std::size_t> parent;
  std::size_t created_round = 0;
  ModelStatus status = ModelStatus::kAlive;

  bool alive() const { return status == ModelStatus::kAlive; }
};

/// Central catalog. Model ids index `entries`; `entries.size()` is the total
/// ever allocated and doubles at each milestone. Clone of model m is m + M.
struct ModelRegistry {
  std::vector<ModelEntry> entries;

  std::size_t total_created() const { return entries.size(); }
  std::size_t alive_count() const;
  std::vector<std::size_t> alive_ids() const;
};

/// c[device][model]; zero means the device no longer holds the model.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t devices, std::size_t models, double fill);

  std::size_t devices() const { return rows_.size(); }
  std::size_t models() const { return rows_.empty() ? 0 : rows_.front().size(); }
  double operator()(std::size_t d, std::size_t m) const { return rows_[d][m]; }
  double& operator()(std::size_t d, std::size_t m) { return rows_[d][m]; }
  std::span<const double> row(std::size_t d) const { return rows_[d]; }
  std::span<double> row(std::size_t d) { return rows_[d]; }
  void resize_models(std::size_t models);
  /// Ids with nonzero score on device d, ascending.
  std::vector<std::size_t> held_models(std::size_t d) const;
  /// Scales device d's nonzero scores to sum to 1.
  void normalize_row(std::size_t d);

  bool operator==(const ScoreMatrix&) const = default;

 private:
  std::vector<std::vector<double>> rows_;
};

/// Ring buffers of the most recent validation accuracies, newest last.
class AccuracyHistory {
 public:
  AccuracyHistory() = default;
  AccuracyHistory(std::size_t devices, std::size_t window);

  void push(std::size_t d, std::size_t m, double accuracy);
  std::span<const double> get(std::size_t d, std::size_t m) const;
  /// Mean of the stored entries; nullopt when empty.
  std::optional<double> mean(std::size_t d, std::size_t m) const;
  std::size_t window() const { return window_; }

 private:
  std::size_t window_ = 1;
  std::vector<std::vector<std::vector<double>>> buf_;  // [device][model]
};

struct SimState {
  SimulationConfig config;
  MlpSpec model_spec;
  ModelRegistry registry;
  ScoreMatrix scores;
  AccuracyHistory history;
  std::vector<DeviceShard> shards;
  /// Number of completed rounds.
  std::size_t round = 0;
};

struct LocalUpdate {
  std::size_t model_id;
  ModelWeights weights;
};

struct DeviceUpdates {
  std::size_t device_id;
  std::vector<LocalUpdate> updates;
};

/// Per-device record in a round's metrics.
struct DeviceRoundMetrics {
  std::size_t device_id;
  std::size_t archetype_id;
  std::size_t best_model_id;
  double best_score;
  double performance;
  std::size_t alive_models;
  double score_stddev;
};

struct RoundMetrics {
  std::size_t round;
  std::vector<DeviceRoundMetrics> devices;
  std::size_t alive_models_total;
  std::size_t created_models_total;
  std::size_t bytes_uplinked;
  double wall_ms;
  std::vector<std::size_t> participants;
};

SimState init_simulation(const SimulationConfig& config, std::vector<DeviceShard> shards);

/// Uniform K-subset without replacement, returned ascending.
std::vector<std::size_t> select_round_devices(const SimState& state, Rng& rng);

/// Trains every live model the device holds for E epochs from the current
/// global weights and quantizes the result for upload.
DeviceUpdates local_train(std::size_t device, const SimState& state);

/// Validation accuracy of each live model the device holds, by model id.
std::vector<std::pair<std::size_t, double>> evaluate_device_models(
    std::size_t device, const SimState& state);

/// Score-weighted average of the contributors' weights for model m.
/// `updates` must be ordered by device id. Returns nullopt when no
/// contributor has a positive score.
std::optional<ModelWeights> aggregate_model(
    std::size_t model_id,
    std::span<const std::pair<std::size_t, const ModelWeights*>> updates,
    const ScoreMatrix& scores);

/// Recomputes the listed devices' scores from their accuracy history.
void update_scores(SimState& state, std::span<const std::size_t> devices,
                   std::size_t round);

/// Per-device deletion of underperforming models, then renormalization.
void prune_device_models(SimState& state, std::size_t round);

/// Marks models that no device holds any more as deleted. Returns their ids.
std::vector<std::size_t> garbage_collect(SimState& state);

/// Clones every live model, assigns clone scores and doubles the id space.
void clone_models(SimState& state, std::size_t round);

RoundMetrics run_round(SimState& state, Execution exec = Execution::kParallel,
                       bool record_wall_time = false);

/// Test accuracy of the device's top-scoring model (ties to lower id).
double device_performance(std::size_t device, const SimState& state);

/// Highest-scoring held model, lowest id on ties.
std::size_t best_model(std::size_t device, const ScoreMatrix& scores);

/// Population standard deviation.
double population_stddev(std::span<const double> values);

}  // namespace fedcd
