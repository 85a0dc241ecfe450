#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fedcd/mlp.hpp"
#include "fedcd/rng.hpp"

namespace fedcd {

/// Device data concentrated on one focus label inside a group of labels.
struct HierarchicalArchetype {
  std::set<std::uint32_t> meta_labels;
  std::uint32_t focus_label = 0;
  double bias = 0.6;

  bool operator==(const HierarchicalArchetype&) const = default;
};

/// Label j is weighted by the hypergeometric mass at k = j.
struct HypergeometricArchetype {
  std::int64_t population = 110;
  std::int64_t successes = 5;
  std::int64_t draws = 10;

  bool operator==(const HypergeometricArchetype&) const = default;
};

using ArchetypeSpec = std::variant<HierarchicalArchetype, HypergeometricArchetype>;

void validate_archetype(const ArchetypeSpec& a);

/// Per-class example pools.
struct GlobalDataset {
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<Matrix> pools;  // pools[c] holds class c rows

  std::size_t size() const;
};

struct DeviceShard {
  std::size_t device_id = 0;
  /// Archetype index used for grouping in reports.
  std::size_t archetype_id = 0;
  ArchetypeSpec archetype;
  LabeledBatch train, val, test;
  /// Pool row drawn for each example, per label; used to check disjointness.
  std::vector<std::vector<std::size_t>> train_rows, val_rows, test_rows;
};

/// Isotropic unit-variance Gaussian blobs. Class means are random unit
/// directions scaled by `spread`.
GlobalDataset gen_synthetic_classes(std::size_t num_classes, std::size_t dim,
                                    std::size_t per_class, double spread, Rng& rng);

/// Reads comma-separated rows with the integer label in the last column.
GlobalDataset load_dataset_csv(const std::filesystem::path& path);

std::vector<double> archetype_label_weights(const ArchetypeSpec& a,
                                            std::size_t num_classes);

/// Integer counts summing to `total`, by floor plus largest-remainder
/// correction (ties to the lower label).
std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                   std::size_t total);

struct ShardOptions {
  std::size_t samples_per_device = 600;
  double val_frac = 0.2;
  double test_frac = 0.2;
};

struct DeviceArchetype {
  std::size_t archetype_id;
  ArchetypeSpec spec;
};

/// Device d uses a stream keyed by (seed, d), so shards are independent of
/// construction order.
std::vector<DeviceShard> build_device_shards(const GlobalDataset& g,
                                             const std::vector<DeviceArchetype>& specs,
                                             const ShardOptions& opts,
                                             std::uint64_t seed);

/// Labels split into `num_meta` contiguous groups; one archetype per label.
/// Device bias ~ Unif(bias_lo, bias_hi), one draw per device.
std::vector<DeviceArchetype> hierarchical_population(std::size_t num_classes,
                                                     std::size_t num_meta,
                                                     std::size_t devices_per_archetype,
                                                     double bias_lo, double bias_hi,
                                                     Rng& rng);

std::vector<DeviceArchetype> hypergeometric_population(
    std::int64_t population, const std::vector<std::int64_t>& successes,
    std::int64_t draws, std::size_t devices_per_archetype);

/// Stable 64-bit fingerprint of a shard's contents.
std::uint64_t shard_hash(const DeviceShard& s);

}  // namespace fedcd
