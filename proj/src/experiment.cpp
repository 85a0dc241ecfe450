#include "fedcd/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "fedcd/metrics.hpp"

namespace fedcd {

using Json = nlohmann::ordered_json;

std::size_t DataConfig::archetype_count() const {
  return scheme == ArchetypeScheme::kHierarchical ? num_classes : hypergeom_successes.size();
}

namespace {

const char* scheme_name(ArchetypeScheme s) {
  return s == ArchetypeScheme::kHierarchical ? "hierarchical" : "hypergeometric";
}

// Pulls typed fields out of one section and rejects anything left over.
class SectionReader {
 public:
  SectionReader(const Json& doc, std::string section) : section_(std::move(section)) {
    if (!doc.contains(section_)) return;
    node_ = &doc.at(section_);
    if (!node_->is_object()) throw ConfigError(section_, "section must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(section_ + "." + key, std::string("wrong type: ") + e.what());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!seen_.contains(k)) throw ConfigError(section_ + "." + k, "unknown key");
  }

  std::string path(const std::string& key) const { return section_ + "." + key; }

 private:
  std::string section_;
  const Json* node_ = nullptr;
  std::set<std::string> seen_;
};

const std::vector<std::string> kSections{"simulation", "trainer", "model", "data", "output"};

}  // namespace

Json ExperimentConfig::to_json() const {
  Json j;
  j["simulation"] = {
      {"devices_per_round", sim.devices_per_round},
      {"total_rounds", sim.total_rounds},
      {"milestones", sim.milestones},
      {"score_window", sim.score_window},
      {"late_prune_round", sim.late_prune_round},
      {"late_prune_threshold", sim.late_prune_threshold},
      {"score_noise_std", sim.score_noise_std},
      {"quantization_bits", sim.quantization.bits},
      {"seed", sim.seed},
      {"strategy", to_string(sim.strategy)},
  };
  j["trainer"] = {
      {"local_epochs", sim.trainer.epochs},
      {"learning_rate", sim.trainer.learning_rate},
      {"batch_size", sim.trainer.batch_size},
  };
  j["model"] = {
      {"hidden_layers", sim.hidden_layers},
      {"activation", to_string(sim.activation)},
  };
  j["data"] = {
      {"scheme", scheme_name(data.scheme)},
      {"num_classes", data.num_classes},
      {"feature_dim", data.feature_dim},
      {"per_class", data.per_class},
      {"spread", data.spread},
      {"csv_path", data.csv_path},
      {"devices_per_archetype", data.devices_per_archetype},
      {"samples_per_device", data.samples_per_device},
      {"val_frac", data.val_frac},
      {"test_frac", data.test_frac},
      {"num_meta", data.num_meta},
      {"bias_min", data.bias_min},
      {"bias_max", data.bias_max},
      {"hypergeom_population", data.hypergeom_population},
      {"hypergeom_successes", data.hypergeom_successes},
      {"hypergeom_draws", data.hypergeom_draws},
  };
  j["output"] = {
      {"dir", output.dir},
      {"record_wall_time", output.record_wall_time},
      {"parallel", output.parallel},
  };
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("", "experiment file must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(kSections.begin(), kSections.end(), k) == kSections.end())
      throw ConfigError(k, "unknown section");

  ExperimentConfig c;
  auto& s = c.sim;
  {
    SectionReader r(j, "simulation");
    r.get("devices_per_round", s.devices_per_round);
    r.get("total_rounds", s.total_rounds);
    r.get("milestones", s.milestones);
    r.get("score_window", s.score_window);
    r.get("late_prune_round", s.late_prune_round);
    r.get("late_prune_threshold", s.late_prune_threshold);
    r.get("score_noise_std", s.score_noise_std);
    r.get("quantization_bits", s.quantization.bits);
    r.get("seed", s.seed);
    std::string strategy = to_string(s.strategy);
    r.get("strategy", strategy);
    try {
      s.strategy = strategy_from_string(strategy);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.path("strategy"), e.what());
    }
    r.finish();
  }
  {
    SectionReader r(j, "trainer");
    r.get("local_epochs", s.trainer.epochs);
    r.get("learning_rate", s.trainer.learning_rate);
    r.get("batch_size", s.trainer.batch_size);
    r.finish();
  }
  {
    SectionReader r(j, "model");
    r.get("hidden_layers", s.hidden_layers);
    std::string act = to_string(s.activation);
    r.get("activation", act);
    try {
      s.activation = activation_from_string(act);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.path("activation"), e.what());
    }
    r.finish();
  }
  auto& d = c.data;
  {
    SectionReader r(j, "data");
    std::string scheme = scheme_name(d.scheme);
    r.get("scheme", scheme);
    if (scheme == "hierarchical")
      d.scheme = ArchetypeScheme::kHierarchical;
    else if (scheme == "hypergeometric")
      d.scheme = ArchetypeScheme::kHypergeometric;
    else
      throw ConfigError(r.path("scheme"), "unknown archetype scheme '" + scheme + "'");
    r.get("num_classes", d.num_classes);
    r.get("feature_dim", d.feature_dim);
    r.get("per_class", d.per_class);
    r.get("spread", d.spread);
    r.get("csv_path", d.csv_path);
    r.get("devices_per_archetype", d.devices_per_archetype);
    r.get("samples_per_device", d.samples_per_device);
    r.get("val_frac", d.val_frac);
    r.get("test_frac", d.test_frac);
    r.get("num_meta", d.num_meta);
    r.get("bias_min", d.bias_min);
    r.get("bias_max", d.bias_max);
    r.get("hypergeom_population", d.hypergeom_population);
    r.get("hypergeom_successes", d.hypergeom_successes);
    r.get("hypergeom_draws", d.hypergeom_draws);
    r.finish();
  }
  {
    SectionReader r(j, "output");
    r.get("dir", c.output.dir);
    r.get("record_wall_time", c.output.record_wall_time);
    r.get("parallel", c.output.parallel);
    r.finish();
  }

  if (d.devices_per_archetype < 1)
    throw ConfigError("data.devices_per_archetype", "must be >= 1");
  if (d.scheme == ArchetypeScheme::kHypergeometric && d.hypergeom_successes.empty())
    throw ConfigError("data.hypergeom_successes", "needs at least one archetype");
  if (d.scheme == ArchetypeScheme::kHierarchical &&
      (d.num_meta == 0 || d.num_classes % d.num_meta != 0))
    throw ConfigError("data.num_meta", "must divide num_classes");
  if (!(0.0 <= d.bias_min && d.bias_min <= d.bias_max && d.bias_max <= 1.0))
    throw ConfigError("data.bias_min", "bias range must satisfy 0 <= min <= max <= 1");
  s.n_devices = d.device_count();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("simulation", e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::pair<std::string, std::string> split_override(const std::string& arg) {
  std::string s = arg;
  while (!s.empty() && s.front() == '-') s.erase(s.begin());
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(s, "override must look like key=value");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void apply_override(Json& doc, const std::string& key, const std::string& value) {
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed = value;
  }
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
    if (!doc.contains(section) || !doc[section].contains(name))
      throw ConfigError(key, "unknown key");
    doc[section][name] = parsed;
    return;
  }
  std::string owner;
  for (const auto& section : kSections) {
    if (doc.contains(section) && doc[section].contains(key)) {
      if (!owner.empty()) throw ConfigError(key, "ambiguous key; qualify it with a section");
      owner = section;
    }
  }
  if (owner.empty()) throw ConfigError(key, "unknown key");
  doc[owner][key] = parsed;
}

GlobalDataset make_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data.csv_path.empty()) {
    auto g = load_dataset_csv(cfg.data.csv_path);
    if (g.num_classes > cfg.data.num_classes)
      throw ConfigError("data.csv_path", "dataset has more labels than data.num_classes");
    g.pools.resize(cfg.data.num_classes, Matrix(0, g.feature_dim));
    g.num_classes = cfg.data.num_classes;
    return g;
  }
  Rng rng(derive_seed(cfg.sim.seed, "dataset"));
  return gen_synthetic_classes(cfg.data.num_classes, cfg.data.feature_dim, cfg.data.per_class,
                               cfg.data.spread, rng);
}

std::vector<DeviceShard> make_shards(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  const auto g = make_dataset(cfg);
  std::vector<DeviceArchetype> population;
  if (d.scheme == ArchetypeScheme::kHierarchical) {
    Rng rng(derive_seed(cfg.sim.seed, "population"));
    population = hierarchical_population(d.num_classes, d.num_meta, d.devices_per_archetype,
                                         d.bias_min, d.bias_max, rng);
  } else {
    population = hypergeometric_population(d.hypergeom_population, d.hypergeom_successes,
                                           d.hypergeom_draws, d.devices_per_archetype);
  }
  return build_device_shards(g, population, {d.samples_per_device, d.val_frac, d.test_frac},
                             derive_seed(cfg.sim.seed, "shards"));
}

RunResult run_experiment(const ExperimentConfig& cfg, std::vector<DeviceShard> shards) {
  RunResult result;
  for (const auto& s : shards) result.shard_hashes.push_back(shard_hash(s));
  auto state = init_simulation(cfg.sim, std::move(shards));
  const auto exec = cfg.output.parallel ? Execution::kParallel : Execution::kSerial;
  for (std::size_t r = 0; r < cfg.sim.total_rounds; ++r)
    result.rounds.push_back(run_round(state, exec, cfg.output.record_wall_time));
  result.summary = summarize_run(cfg.to_json(), result.rounds);
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, make_shards(cfg));
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  write_round_csv(dir / "rounds.csv", result.rounds);
  write_summary(dir / "summary.json", result.summary);
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir = cfg.output.dir;
  if (const char* root = std::getenv("FEDCD_OUTPUT_ROOT"); root && *root && dir.is_relative())
    return std::filesystem::path(root) / dir;
  return dir;
}

}  // namespace fedcd
