#include "fedcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fedcd {

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double csv_round(double v) { return std::strtod(format_fixed(v).c_str(), nullptr); }

double oscillation(const std::vector<std::vector<double>>& series, std::size_t window) {
  if (series.size() < 2) throw std::invalid_argument("oscillation needs at least two rounds");
  if (window == 0) throw std::invalid_argument("oscillation window must be >= 1");
  const std::size_t steps = std::min(window, series.size() - 1);
  const std::size_t devices = series.front().size();
  if (devices == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = series.size() - steps; r < series.size(); ++r) {
    if (series[r].size() != devices || series[r - 1].size() != devices)
      throw std::invalid_argument("oscillation series rows differ in device count");
    for (std::size_t d = 0; d < devices; ++d) total += std::abs(series[r][d] - series[r - 1][d]);
  }
  return total / static_cast<double>(steps * devices);
}

double score_stddev_avg(const ScoreMatrix& scores) {
  if (scores.devices() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < scores.devices(); ++d) {
    std::vector<double> held;
    for (double v : scores.row(d))
      if (v != 0.0) held.push_back(v);
    total += population_stddev(held);
  }
  return total / static_cast<double>(scores.devices());
}

std::vector<std::vector<double>> performance_series(std::span<const RoundMetrics> rounds) {
  std::vector<std::vector<double>> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) {
    std::vector<const DeviceRoundMetrics*> sorted;
    for (const auto& d : r.devices) sorted.push_back(&d);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->device_id < b->device_id; });
    std::vector<double> row;
    row.reserve(sorted.size());
    for (const auto* d : sorted) row.push_back(csv_round(d->performance));
    out.push_back(std::move(row));
  }
  return out;
}

std::optional<std::size_t> rounds_to_convergence(
    const std::vector<std::vector<double>>& series, std::size_t window, double threshold) {
  // Trailing window ending at index r covers steps r-window+1 .. r.
  std::optional<std::size_t> start;
  for (std::size_t r = window; r < series.size(); ++r) {
    const std::vector<std::vector<double>> slice(series.begin() + (r - window),
                                                 series.begin() + r + 1);
    if (oscillation(slice, window) < threshold) {
      if (!start) start = r + 1;  // 1-based round number
    } else {
      start.reset();
    }
  }
  return start;
}

void write_round_csv(const std::filesystem::path& path, std::span<const RoundMetrics> rounds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kRoundCsvHeader << '\n';
  for (const auto& r : rounds) {
    std::vector<const DeviceRoundMetrics*> rows;
    for (const auto& d : r.devices) rows.push_back(&d);
    std::sort(rows.begin(), rows.end(),
              [](auto* a, auto* b) { return a->device_id < b->device_id; });
    for (const auto* d : rows) {
      out << r.round << ',' << d->device_id << ',' << d->archetype_id << ','
          << d->best_model_id << ',' << format_fixed(d->best_score) << ','
          << format_fixed(d->performance) << ',' << d->alive_models << ','
          << r.alive_models_total << ',' << format_fixed(d->score_stddev) << ','
          << r.bytes_uplinked << ',' << format_fixed(r.wall_ms) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<CsvRow> read_round_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRoundCsvHeader)
    throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    auto u = [&](int k) { return static_cast<std::size_t>(std::stoull(cells[k])); };
    auto f = [&](int k) { return std::strtod(cells[k].c_str(), nullptr); };
    rows.push_back({u(0), u(1), u(2), u(3), f(4), f(5), u(6), u(7), f(8), u(9), f(10)});
  }
  return rows;
}

nlohmann::ordered_json summarize_run(const nlohmann::ordered_json& config_echo,
                                     std::span<const RoundMetrics> rounds) {
  nlohmann::ordered_json s;
  s["config"] = config_echo;
  if (rounds.empty()) {
    s["final_accuracy_by_archetype"] = nlohmann::ordered_json::object();
    s["rounds_to_convergence"] = nullptr;
    s["final_alive_models"] = 0;
    s["total_uplink_bytes"] = 0;
    return s;
  }
  const auto& last = rounds.back();
  std::map<std::size_t, std::pair<double, std::size_t>> by_arch;
  double mean_final = 0.0;
  for (const auto& d : last.devices) {
    auto& acc = by_arch[d.archetype_id];
    acc.first += csv_round(d.performance);
    acc.second += 1;
    mean_final += csv_round(d.performance);
  }
  nlohmann::ordered_json per_arch = nlohmann::ordered_json::object();
  for (const auto& [a, acc] : by_arch)
    per_arch[std::to_string(a)] = acc.first / static_cast<double>(acc.second);
  s["final_accuracy_by_archetype"] = per_arch;

  const auto series = performance_series(rounds);
  const auto conv = rounds_to_convergence(series);
  s["rounds_to_convergence"] = conv ? nlohmann::ordered_json(*conv) : nlohmann::ordered_json(nullptr);
  s["final_alive_models"] = last.alive_models_total;
  std::size_t bytes = 0;
  double wall = 0.0;
  for (const auto& r : rounds) {
    bytes += r.bytes_uplinked;
    wall += r.wall_ms;
  }
  s["total_uplink_bytes"] = bytes;
  s["final_mean_accuracy"] = mean_final / static_cast<double>(last.devices.size());
  s["oscillation_last_window"] =
      series.size() >= 2 ? nlohmann::ordered_json(oscillation(series, kConvergenceWindow))
                         : nlohmann::ordered_json(nullptr);
  s["created_models"] = last.created_models_total;
  s["rounds"] = rounds.size();
  s["wall_ms"] = wall;
  return s;
}

void write_summary(const std::filesystem::path& path, const nlohmann::ordered_json& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace fedcd
