#include "fedcd/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedcd/hypergeom.hpp"

namespace fedcd {

void validate_archetype(const ArchetypeSpec& a) {
  if (const auto* h = std::get_if<HierarchicalArchetype>(&a)) {
    if (!h->meta_labels.contains(h->focus_label))
      throw std::invalid_argument("focus label must belong to the meta-archetype");
    if (!(h->bias >= 0.0 && h->bias <= 1.0))
      throw std::invalid_argument("bias must lie in [0, 1]");
  } else {
    const auto& g = std::get<HypergeometricArchetype>(a);
    if (g.successes < 0 || g.successes > g.population || g.draws < 0 ||
        g.draws > g.population)
      throw std::invalid_argument("hypergeometric archetype needs 0<=K<=N, 0<=n<=N");
  }
}

std::size_t GlobalDataset::size() const {
  std::size_t n = 0;
  for (const auto& p : pools) n += p.rows;
  return n;
}

GlobalDataset gen_synthetic_classes(std::size_t num_classes, std::size_t dim,
                                    std::size_t per_class, double spread, Rng& rng) {
  if (num_classes < 2 || dim < 2 || per_class < 1)
    throw std::invalid_argument("synthetic data needs C>=2, d>=2, per_class>=1");
  GlobalDataset g{num_classes, dim, {}};
  Matrix means(num_classes, dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto m = means.row(c);
    double norm = 0.0;
    for (double& v : m) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : m) v *= spread / norm;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    Matrix pool(per_class, dim);
    for (std::size_t r = 0; r < per_class; ++r)
      for (std::size_t j = 0; j < dim; ++j) pool(r, j) = means(c, j) + rng.normal();
    g.pools.push_back(std::move(pool));
  }
  return g;
}

GlobalDataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t lineno = 0, dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": not a number: '" + cell + "'");
      }
    }
    if (vals.size() < 2)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": need at least one feature and a label");
    if (dim == 0) dim = vals.size() - 1;
    if (vals.size() - 1 != dim)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": inconsistent column count");
    const double y = vals.back();
    if (y < 0 || y != std::floor(y))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": label must be a non-negative integer");
    labels.push_back(static_cast<std::uint32_t>(y));
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("dataset " + path.string() + " is empty");
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(classes, 0);
  for (auto y : labels) ++counts[y];
  GlobalDataset g{classes, dim, {}};
  for (std::size_t c = 0; c < classes; ++c) g.pools.emplace_back(counts[c], dim);
  std::vector<std::size_t> fill(classes, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto dst = g.pools[labels[r]].row(fill[labels[r]]++);
    std::copy(rows[r].begin(), rows[r].end(), dst.begin());
  }
  return g;
}

std::vector<double> archetype_label_weights(const ArchetypeSpec& a,
                                            std::size_t num_classes) {
  validate_archetype(a);
  std::vector<double> w(num_classes, 0.0);
  if (const auto* h = std::get_if<HierarchicalArchetype>(&a)) {
    for (auto label : h->meta_labels)
      if (label >= num_classes) throw std::invalid_argument("meta label out of range");
    const double others = h->meta_labels.size() > 1
                              ? (1.0 - h->bias) / static_cast<double>(h->meta_labels.size() - 1)
                              : 0.0;
    for (auto label : h->meta_labels) w[label] = others;
    w[h->focus_label] = h->meta_labels.size() > 1 ? h->bias : 1.0;
    return w;
  }
  const auto& g = std::get<HypergeometricArchetype>(a);
  // Exact masses; k >= C folds into the last label.
  std::vector<BigRational> mass(num_classes, BigRational(0));
  for (std::int64_t k = 0; k <= g.draws; ++k) {
    const auto slot = std::min<std::size_t>(static_cast<std::size_t>(k), num_classes - 1);
    mass[slot] += hypergeom_pmf_exact(g.population, g.successes, g.draws, k);
  }
  BigRational total = 0;
  for (const auto& m : mass) total += m;
  for (std::size_t j = 0; j < num_classes; ++j)
    w[j] = static_cast<double>(mass[j] / total);
  return w;
}

std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                   std::size_t total) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
    sum += w;
  }
  if (sum <= 0.0) throw std::invalid_argument("weights must not all be zero");
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> rem(weights.size());
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double exact = weights[j] / sum * static_cast<double>(total);
    counts[j] = static_cast<std::size_t>(std::floor(exact));
    rem[j] = exact - static_cast<double>(counts[j]);
    assigned += counts[j];
  }
  // Floating error can push the floor sum one past total; trim the smallest
  // remainders first in that case.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    if (weights[order[k]] == 0.0) continue;
    ++counts[order[k]];
    ++assigned;
  }
  for (std::size_t k = order.size(); assigned > total;) {
    k = (k == 0 ? order.size() : k) - 1;
    if (counts[order[k]] == 0) continue;
    --counts[order[k]];
    --assigned;
  }
  return counts;
}

namespace {

LabeledBatch gather(const GlobalDataset& g,
                    const std::vector<std::vector<std::size_t>>& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  LabeledBatch b;
  b.features = Matrix(n, g.feature_dim);
  b.labels.reserve(n);
  std::size_t out = 0;
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t r : rows[c]) {
      auto src = g.pools[c].row(r);
      std::copy(src.begin(), src.end(), b.features.row(out++).begin());
      b.labels.push_back(static_cast<std::uint32_t>(c));
    }
  return b;
}

}  // namespace

std::vector<DeviceShard> build_device_shards(const GlobalDataset& g,
                                             const std::vector<DeviceArchetype>& specs,
                                             const ShardOptions& opts,
                                             std::uint64_t seed) {
  if (!(opts.val_frac > 0.0 && opts.val_frac < 1.0 && opts.test_frac > 0.0 &&
        opts.test_frac < 1.0 && opts.val_frac + opts.test_frac < 1.0))
    throw std::invalid_argument("val/test fractions must lie in (0,1) and sum below 1");
  std::vector<DeviceShard> shards;
  shards.reserve(specs.size());
  for (std::size_t d = 0; d < specs.size(); ++d) {
    Rng rng(derive_seed(seed, "shard", {d}));
    const auto weights = archetype_label_weights(specs[d].spec, g.num_classes);
    const auto counts = apportion(weights, opts.samples_per_device);
    DeviceShard s;
    s.device_id = d;
    s.archetype_id = specs[d].archetype_id;
    s.archetype = specs[d].spec;
    s.train_rows.resize(g.num_classes);
    s.val_rows.resize(g.num_classes);
    s.test_rows.resize(g.num_classes);
    for (std::size_t c = 0; c < g.num_classes; ++c) {
      const std::size_t want = counts[c];
      if (want == 0) continue;
      const std::size_t have = g.pools[c].rows;
      if (want > have)
        throw std::invalid_argument("device " + std::to_string(d) + " needs " +
                                    std::to_string(want) + " examples of label " +
                                    std::to_string(c) + " but the pool holds " +
                                    std::to_string(have));
      std::vector<std::size_t> idx(have);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t k = 0; k < want; ++k)
        std::swap(idx[k], idx[k + rng.below(have - k)]);
      const auto n_val = static_cast<std::size_t>(std::llround(want * opts.val_frac));
      const auto n_test = std::min(
          want - n_val, static_cast<std::size_t>(std::llround(want * opts.test_frac)));
      s.val_rows[c].assign(idx.begin(), idx.begin() + n_val);
      s.test_rows[c].assign(idx.begin() + n_val, idx.begin() + n_val + n_test);
      s.train_rows[c].assign(idx.begin() + n_val + n_test, idx.begin() + want);
    }
    s.train = gather(g, s.train_rows);
    s.val = gather(g, s.val_rows);
    s.test = gather(g, s.test_rows);
    if (s.train.empty() || s.val.empty() || s.test.empty())
      throw std::invalid_argument("device " + std::to_string(d) +
                                  " has an empty train, validation or test split");
    shards.push_back(std::move(s));
  }
  return shards;
}

std::vector<DeviceArchetype> hierarchical_population(std::size_t num_classes,
                                                     std::size_t num_meta,
                                                     std::size_t devices_per_archetype,
                                                     double bias_lo, double bias_hi,
                                                     Rng& rng) {
  if (num_meta == 0 || num_classes % num_meta != 0)
    throw std::invalid_argument("class count must split evenly into meta-archetypes");
  if (!(0.0 <= bias_lo && bias_lo <= bias_hi && bias_hi <= 1.0))
    throw std::invalid_argument("bias range must satisfy 0 <= lo <= hi <= 1");
  const std::size_t group = num_classes / num_meta;
  std::vector<DeviceArchetype> out;
  for (std::size_t label = 0; label < num_classes; ++label) {
    HierarchicalArchetype h;
    const std::size_t first = (label / group) * group;
    for (std::size_t l = first; l < first + group; ++l)
      h.meta_labels.insert(static_cast<std::uint32_t>(l));
    h.focus_label = static_cast<std::uint32_t>(label);
    for (std::size_t k = 0; k < devices_per_archetype; ++k) {
      h.bias = bias_lo == bias_hi ? bias_lo : rng.uniform(bias_lo, bias_hi);
      out.push_back({label, h});
    }
  }
  return out;
}

std::vector<DeviceArchetype> hypergeometric_population(
    std::int64_t population, const std::vector<std::int64_t>& successes,
    std::int64_t draws, std::size_t devices_per_archetype) {
  std::vector<DeviceArchetype> out;
  for (std::size_t a = 0; a < successes.size(); ++a)
    for (std::size_t k = 0; k < devices_per_archetype; ++k)
      out.push_back({a, HypergeometricArchetype{population, successes[a], draws}});
  return out;
}

std::uint64_t shard_hash(const DeviceShard& s) {
  std::uint64_t h = splitmix64(s.device_id);
  auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
  for (const auto* b : {&s.train, &s.val, &s.test}) {
    mix(b->size());
    for (double v : b->features.data) mix(std::bit_cast<std::uint64_t>(v));
    for (auto y : b->labels) mix(y);
  }
  return h;
}

}  // namespace fedcd
