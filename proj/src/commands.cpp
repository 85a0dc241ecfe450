#include "fedcd/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "fedcd/experiment.hpp"
#include "fedcd/metrics.hpp"

namespace fedcd {

using Json = nlohmann::ordered_json;

namespace {

ExperimentConfig load_with_overrides(const std::filesystem::path& path,
                                     const std::vector<std::string>& overrides) {
  Json doc = ExperimentConfig::load(path).to_json();
  for (const auto& o : overrides) {
    const auto [k, v] = split_override(o);
    apply_override(doc, k, v);
  }
  return ExperimentConfig::from_json(doc);
}

// Maps exceptions onto exit codes with a one-line diagnostic.
template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

std::map<std::string, double> archetype_accuracy(const RunResult& r) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : r.summary["final_accuracy_by_archetype"].items())
    out[k] = v.get<double>();
  return out;
}

}  // namespace

int cmd_run(const std::filesystem::path& config, const std::vector<std::string>& overrides,
            std::ostream& log) {
  return guarded(log, [&] {
    const auto cfg = load_with_overrides(config, overrides);
    const auto dir = resolve_output_dir(cfg);
    const auto result = run_experiment(cfg);
    write_run_outputs(dir, result);
    log << "wrote " << (dir / "rounds.csv").string() << " (final mean accuracy "
        << format_fixed(result.summary["final_mean_accuracy"].get<double>()) << ", "
        << result.summary["final_alive_models"].get<std::size_t>() << " live models)\n";
    return kExitOk;
  });
}

int cmd_compare(const std::filesystem::path& config, const std::vector<std::string>& overrides,
                std::ostream& log) {
  return guarded(log, [&] {
    const auto base = load_with_overrides(config, overrides);
    auto fedcd = base;
    fedcd.sim.strategy = Strategy::kFedCD;
    auto fedavg = base;
    fedavg.sim.strategy = Strategy::kFedAvg;
    fedavg.sim.milestones.clear();

    const auto shards = make_shards(base);
    const auto cd = run_experiment(fedcd, shards);
    const auto avg = run_experiment(fedavg, shards);
    const auto dir = resolve_output_dir(base);
    write_run_outputs(dir / "fedcd", cd);
    write_run_outputs(dir / "fedavg", avg);

    Json delta = Json::object();
    const auto a = archetype_accuracy(cd), b = archetype_accuracy(avg);
    for (const auto& [k, v] : a) delta[k] = v - b.at(k);
    const auto osc_cd = cd.summary["oscillation_last_window"];
    const auto osc_avg = avg.summary["oscillation_last_window"];
    Json out;
    out["accuracy_delta_by_archetype"] = delta;
    out["mean_accuracy_delta"] = cd.summary["final_mean_accuracy"].get<double>() -
                                 avg.summary["final_mean_accuracy"].get<double>();
    out["oscillation_fedcd"] = osc_cd;
    out["oscillation_fedavg"] = osc_avg;
    out["oscillation_ratio"] =
        (osc_cd.is_number() && osc_avg.is_number() && osc_avg.get<double>() > 0.0)
            ? Json(osc_cd.get<double>() / osc_avg.get<double>())
            : Json(nullptr);
    out["shard_hashes_equal"] = cd.shard_hashes == avg.shard_hashes;
    write_summary(dir / "compare.json", out);
    log << "mean accuracy delta (fedcd - fedavg): "
        << format_fixed(out["mean_accuracy_delta"].get<double>()) << '\n';
    return kExitOk;
  });
}

int cmd_sweep(const std::filesystem::path& config, const std::string& param,
              const std::vector<std::string>& values, const std::vector<std::string>& overrides,
              std::ostream& log) {
  return guarded(log, [&] {
    std::vector<std::string> keys;
    if (param == "bias")
      keys = {"data.bias_min", "data.bias_max"};
    else if (param == "quantization_bits")
      keys = {"simulation.quantization_bits"};
    else if (param == "score_window")
      keys = {"simulation.score_window"};
    else
      throw ConfigError(param, "unknown sweep parameter (expected bias, quantization_bits or score_window)");
    if (values.empty()) throw ConfigError(param, "sweep needs at least one value");

    const auto base = load_with_overrides(config, overrides);
    const auto root = resolve_output_dir(base);
    std::filesystem::create_directories(root);
    std::ofstream agg(root / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!agg) throw std::runtime_error("cannot write " + (root / "sweep.csv").string());
    agg << "value,round,alive_models_total,mean_score_stddev,mean_test_accuracy\n";
    for (const auto& v : values) {
      Json doc = base.to_json();
      for (const auto& k : keys) apply_override(doc, k, v);
      const auto cfg = ExperimentConfig::from_json(doc);
      const auto result = run_experiment(cfg);
      write_run_outputs(root / (param + "_" + v), result);
      for (const auto& r : result.rounds) {
        double sd = 0.0, acc = 0.0;
        for (const auto& d : r.devices) {
          sd += d.score_stddev;
          acc += d.performance;
        }
        const auto n = static_cast<double>(r.devices.size());
        agg << v << ',' << r.round << ',' << r.alive_models_total << ','
            << format_fixed(sd / n) << ',' << format_fixed(acc / n) << '\n';
      }
      log << param << '=' << v << ": final mean accuracy "
          << format_fixed(result.summary["final_mean_accuracy"].get<double>()) << ", "
          << result.summary["final_alive_models"].get<std::size_t>() << " live models\n";
    }
    return kExitOk;
  });
}

}  // namespace fedcd
