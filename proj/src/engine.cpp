#include "fedcd/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace fedcd {

std::string to_string(Strategy s) { return s == Strategy::kFedCD ? "fedcd" : "fedavg"; }

Strategy strategy_from_string(const std::string& name) {
  if (name == "fedcd") return Strategy::kFedCD;
  if (name == "fedavg") return Strategy::kFedAvg;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

void SimulationConfig::validate() const {
  if (n_devices < 1) throw std::invalid_argument("n_devices must be >= 1");
  if (devices_per_round < 1 || devices_per_round > n_devices)
    throw std::invalid_argument("devices_per_round must lie in [1, n_devices]");
  if (total_rounds < 1) throw std::invalid_argument("total_rounds must be >= 1");
  if (score_window < 1) throw std::invalid_argument("score_window must be >= 1");
  if (!(score_noise_std >= 0.0))
    throw std::invalid_argument("score_noise_std must be >= 0");
  if (!(late_prune_threshold >= 0.0 && late_prune_threshold <= 1.0))
    throw std::invalid_argument("late_prune_threshold must lie in [0, 1]");
  for (std::size_t k = 0; k < milestones.size(); ++k) {
    if (milestones[k] < 1 || milestones[k] > total_rounds)
      throw std::invalid_argument("milestones must lie in [1, total_rounds]");
    if (k > 0 && milestones[k] <= milestones[k - 1])
      throw std::invalid_argument("milestones must be strictly increasing");
  }
  if (strategy == Strategy::kFedAvg && !milestones.empty())
    throw std::invalid_argument("the fedavg strategy takes no milestones");
  if (trainer.epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
  if (trainer.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(trainer.learning_rate > 0.0))
    throw std::invalid_argument("learning_rate must be > 0");
  for (std::size_t h : hidden_layers)
    if (h == 0) throw std::invalid_argument("hidden layer sizes must be >= 1");
  quantization.validate();
}

bool SimulationConfig::is_milestone(std::size_t round) const {
  return std::binary_search(milestones.begin(), milestones.end(), round);
}

MlpSpec SimulationConfig::model_spec(std::size_t input_dim,
                                     std::size_t num_classes) const {
  MlpSpec spec;
  spec.layer_sizes.push_back(input_dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden_layers.begin(),
                          hidden_layers.end());
  spec.layer_sizes.push_back(num_classes);
  spec.activation = activation;
  return spec;
}

std::size_t ModelRegistry::alive_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.alive(); }));
}

std::vector<std::size_t> ModelRegistry::alive_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t m = 0; m < entries.size(); ++m)
    if (entries[m].alive()) ids.push_back(m);
  return ids;
}

ScoreMatrix::ScoreMatrix(std::size_t devices, std::size_t models, double fill)
    : rows_(devices, std::vector<double>(models, fill)) {}

void ScoreMatrix::resize_models(std::size_t models) {
  for (auto& r : rows_) r.resize(models, 0.0);
}

std::vector<std::size_t> ScoreMatrix::held_models(std::size_t d) const {
  std::vector<std::size_t> held;
  for (std::size_t m = 0; m < rows_[d].size(); ++m)
    if (rows_[d][m] != 0.0) held.push_back(m);
  return held;
}

void ScoreMatrix::normalize_row(std::size_t d) {
  double sum = 0.0;
  for (double v : rows_[d]) sum += v;
  if (sum <= 0.0) return;
  for (double& v : rows_[d]) v /= sum;
}

AccuracyHistory::AccuracyHistory(std::size_t devices, std::size_t window)
    : window_(window), buf_(devices) {}

void AccuracyHistory::push(std::size_t d, std::size_t m, double accuracy) {
  auto& row = buf_[d];
  if (row.size() <= m) row.resize(m + 1);
  auto& ring = row[m];
  if (ring.size() == window_) ring.erase(ring.begin());
  ring.push_back(accuracy);
}

std::span<const double> AccuracyHistory::get(std::size_t d, std::size_t m) const {
  if (m >= buf_[d].size()) return {};
  return buf_[d][m];
}

std::optional<double> AccuracyHistory::mean(std::size_t d, std::size_t m) const {
  const auto h = get(d, m);
  if (h.empty()) return std::nullopt;
  double s = 0.0;
  for (double v : h) s += v;
  return s / static_cast<double>(h.size());
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

SimState init_simulation(const SimulationConfig& config, std::vector<DeviceShard> shards) {
  config.validate();
  if (shards.size() != config.n_devices)
    throw std::invalid_argument("expected " + std::to_string(config.n_devices) +
                                " device shards, got " + std::to_string(shards.size()));
  const auto& first = shards.front().train;
  std::size_t classes = 0;
  for (const auto& s : shards)
    for (const auto* b : {&s.train, &s.val, &s.test}) {
      if (b->features.cols != first.features.cols)
        throw std::invalid_argument("device shards disagree on feature width");
      for (auto y : b->labels) classes = std::max<std::size_t>(classes, y + 1);
    }
  for (const auto& s : shards)
    if (const auto* h = std::get_if<HierarchicalArchetype>(&s.archetype))
      for (auto l : h->meta_labels) classes = std::max<std::size_t>(classes, l + 1);

  SimState state;
  state.config = config;
  state.model_spec = config.model_spec(first.features.cols, std::max<std::size_t>(classes, 2));
  Rng init_rng(derive_seed(config.seed, "init"));
  state.registry.entries.push_back(
      ModelEntry{init_weights(state.model_spec, init_rng), std::nullopt, 0, ModelStatus::kAlive});
  state.scores = ScoreMatrix(config.n_devices, 1, 1.0);
  state.history = AccuracyHistory(config.n_devices, config.score_window);
  state.shards = std::move(shards);
  return state;
}

std::vector<std::size_t> select_round_devices(const SimState& state, Rng& rng) {
  const std::size_t n = state.config.n_devices, k = state.config.devices_per_round;
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.below(n - i)]);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

// Pre-normalization clone score when the parent is the device's only model.
constexpr double kLoneCloneScore = 0.5;

std::vector<std::size_t> held_alive(std::size_t device, const SimState& state) {
  std::vector<std::size_t> out;
  for (std::size_t m : state.scores.held_models(device))
    if (state.registry.entries[m].alive()) out.push_back(m);
  return out;
}

ModelWeights train_one(std::size_t device, std::size_t model, std::size_t round,
                       const SimState& state) {
  Rng rng(derive_seed(state.config.seed, "train", {round, device, model}));
  auto trained = sgd_train(state.registry.entries[model].weights,
                           state.shards[device].train, state.config.trainer, rng);
  return quantize_weights(trained, state.config.quantization);
}

// Runs body(i) for i in [0, n), optionally across OpenMP threads, and
// rethrows the first exception on the calling thread.
template <typename Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  std::exception_ptr error;
  std::mutex error_mu;
  const bool parallel = exec == Execution::kParallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

DeviceUpdates local_train(std::size_t device, const SimState& state) {
  DeviceUpdates out{device, {}};
  for (std::size_t m : held_alive(device, state))
    out.updates.push_back({m, train_one(device, m, state.round + 1, state)});
  return out;
}

std::vector<std::pair<std::size_t, double>> evaluate_device_models(
    std::size_t device, const SimState& state) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t m : held_alive(device, state))
    out.emplace_back(m, evaluate_accuracy(state.registry.entries[m].weights,
                                          state.shards[device].val));
  return out;
}

std::optional<ModelWeights> aggregate_model(
    std::size_t model_id,
    std::span<const std::pair<std::size_t, const ModelWeights*>> updates,
    const ScoreMatrix& scores) {
  std::optional<ModelWeights> out;
  double total = 0.0;
  for (const auto& [device, w] : updates) {
    const double c = scores(device, model_id);
    if (c <= 0.0) continue;
    if (!out) {
      out = ModelWeights{w->spec, std::vector<double>(w->params.size(), 0.0)};
    } else if (w->params.size() != out->params.size()) {
      throw DimensionError("model updates disagree on parameter count");
    }
    for (std::size_t k = 0; k < w->params.size(); ++k) out->params[k] += c * w->params[k];
    total += c;
  }
  if (!out) return std::nullopt;
  for (double& v : out->params) v /= total;
  return out;
}

void update_scores(SimState& state, std::span<const std::size_t> devices,
                   std::size_t round) {
  for (std::size_t d : devices) {
    const auto held = held_alive(d, state);
    if (held.empty()) continue;
    std::vector<double> s(held.size());
    for (std::size_t k = 0; k < held.size(); ++k)
      s[k] = state.history.mean(d, held[k]).value_or(state.scores(d, held[k]));
    if (state.config.score_noise_std > 0.0) {
      Rng noise(derive_seed(state.config.seed, "score-noise", {round, d}));
      for (double& v : s) v = std::max(0.0, v + noise.normal(0.0, state.config.score_noise_std));
    }
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    for (std::size_t k = 0; k < held.size(); ++k)
      state.scores(d, held[k]) =
          total > 0.0 ? s[k] / total : 1.0 / static_cast<double>(held.size());
  }
}

void prune_device_models(SimState& state, std::size_t round) {
  auto& c = state.scores;
  for (std::size_t d = 0; d < c.devices(); ++d) {
    auto held = c.held_models(d);
    if (held.size() < 2) continue;
    std::vector<double> vals;
    for (std::size_t m : held) vals.push_back(c(d, m));
    const double sigma = population_stddev(vals);
    const double top = *std::max_element(vals.begin(), vals.end());
    if (sigma > 1e-9) {
      auto ranked = held;
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](std::size_t a, std::size_t b) { return c(d, a) > c(d, b); });
      for (std::size_t k = 2; k < ranked.size(); ++k)
        if (top - c(d, ranked[k]) >= sigma) c(d, ranked[k]) = 0.0;
    }
    c.normalize_row(d);
    held = c.held_models(d);
    if (round > state.config.late_prune_round && held.size() == 2) {
      // The higher id loses an exact tie.
      const std::size_t lower = c(d, held[1]) <= c(d, held[0]) ? held[1] : held[0];
      if (c(d, lower) <= state.config.late_prune_threshold) c(d, lower) = 0.0;
    }
    c.normalize_row(d);
  }
}

std::vector<std::size_t> garbage_collect(SimState& state) {
  std::vector<std::size_t> removed;
  for (std::size_t m : state.registry.alive_ids()) {
    bool held = false;
    for (std::size_t d = 0; d < state.scores.devices() && !held; ++d)
      held = state.scores(d, m) != 0.0;
    if (!held) {
      auto& e = state.registry.entries[m];
      e.status = ModelStatus::kDeleted;
      e.weights.params.clear();
      e.weights.params.shrink_to_fit();
      removed.push_back(m);
    }
  }
  return removed;
}

void clone_models(SimState& state, std::size_t round) {
  auto& reg = state.registry;
  auto& c = state.scores;
  const std::size_t M = reg.total_created();
  std::vector<std::size_t> held_count(c.devices());
  for (std::size_t d = 0; d < c.devices(); ++d) held_count[d] = c.held_models(d).size();

  reg.entries.resize(2 * M);
  c.resize_models(2 * M);
  const auto parent_scores = c;
  for (std::size_t m = 0; m < M; ++m) {
    auto& clone = reg.entries[M + m];
    clone.created_round = round;
    if (!reg.entries[m].alive()) {
      clone.status = ModelStatus::kNotCloned;
      clone.weights.spec = state.model_spec;
      continue;
    }
    clone.weights = reg.entries[m].weights;
    clone.parent = m;
    clone.status = ModelStatus::kAlive;
    for (std::size_t d = 0; d < c.devices(); ++d) {
      const double parent = parent_scores(d, m);
      if (parent <= 0.0) continue;
      // A lone model has score 1 and would hand its clone nothing.
      c(d, M + m) = held_count[d] == 1 ? kLoneCloneScore : 1.0 - parent;
    }
  }
  for (std::size_t d = 0; d < c.devices(); ++d) c.normalize_row(d);
}

std::size_t best_model(std::size_t device, const ScoreMatrix& scores) {
  const auto row = scores.row(device);
  std::size_t best = row.size();
  for (std::size_t m = 0; m < row.size(); ++m)
    if (row[m] != 0.0 && (best == row.size() || row[m] > row[best])) best = m;
  if (best == row.size())
    throw std::logic_error("device " + std::to_string(device) + " holds no models");
  return best;
}

double device_performance(std::size_t device, const SimState& state) {
  const std::size_t m = best_model(device, state.scores);
  if (!state.registry.entries[m].alive())
    throw std::logic_error("device " + std::to_string(device) + " prefers a deleted model");
  return evaluate_accuracy(state.registry.entries[m].weights, state.shards[device].test);
}

RoundMetrics run_round(SimState& state, Execution exec, bool record_wall_time) {
  const auto t0 = std::chrono::steady_clock::now();
  if (state.round >= state.config.total_rounds)
    throw std::logic_error("simulation already ran all rounds");
  const std::size_t round = state.round + 1;
  const auto& cfg = state.config;

  Rng select_rng(derive_seed(cfg.seed, "select", {round}));
  const auto participants = select_round_devices(state, select_rng);

  // Local training, one job per (device, held model).
  struct Job {
    std::size_t device, model;
  };
  std::vector<Job> jobs;
  for (std::size_t d : participants)
    for (std::size_t m : held_alive(d, state)) jobs.push_back({d, m});
  std::vector<ModelWeights> trained(jobs.size());
  for_each_index(jobs.size(), exec, [&](std::size_t j) {
    trained[j] = train_one(jobs[j].device, jobs[j].model, round, state);
  });

  std::size_t bytes = 0;
  for (const auto& w : trained) bytes += payload_bytes(w.params.size(), cfg.quantization);

  // Aggregation in ascending device order per model.
  for (std::size_t m : state.registry.alive_ids()) {
    std::vector<std::pair<std::size_t, const ModelWeights*>> ups;
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].model == m) ups.emplace_back(jobs[j].device, &trained[j]);
    if (auto w = aggregate_model(m, ups, state.scores)) state.registry.entries[m].weights = std::move(*w);
  }

  if (cfg.strategy == Strategy::kFedCD) {
    std::vector<std::vector<std::pair<std::size_t, double>>> acc(participants.size());
    for_each_index(participants.size(), exec, [&](std::size_t k) {
      acc[k] = evaluate_device_models(participants[k], state);
    });
    for (std::size_t k = 0; k < participants.size(); ++k)
      for (const auto& [m, a] : acc[k]) state.history.push(participants[k], m, a);
    update_scores(state, participants, round);
    prune_device_models(state, round);
    garbage_collect(state);
    if (cfg.is_milestone(round)) clone_models(state, round);
  }
  state.round = round;

  RoundMetrics out;
  out.round = round;
  out.participants = participants;
  out.alive_models_total = state.registry.alive_count();
  out.created_models_total = state.registry.total_created();
  out.bytes_uplinked = bytes;
  out.devices.resize(cfg.n_devices);
  for_each_index(cfg.n_devices, exec, [&](std::size_t d) {
    const auto held = state.scores.held_models(d);
    std::vector<double> vals;
    for (std::size_t m : held) vals.push_back(state.scores(d, m));
    const std::size_t best = best_model(d, state.scores);
    out.devices[d] = DeviceRoundMetrics{d,
                                        state.shards[d].archetype_id,
                                        best,
                                        state.scores(d, best),
                                        device_performance(d, state),
                                        held.size(),
                                        population_stddev(vals)};
  });
  out.wall_ms = record_wall_time
                    ? std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count()
                    : 0.0;
  return out;
}

}  // namespace fedcd
