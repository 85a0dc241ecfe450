#include "fedcd/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "fedcd/hypergeom.hpp"
#include "test_util.hpp"

namespace fedcd {
namespace {

HierarchicalArchetype hier(std::uint32_t focus, double bias) {
  return HierarchicalArchetype{{0, 1, 2, 3, 4}, focus, bias};
}

TEST(GenSyntheticTest, CountsPerLabel) {
  Rng rng(1);
  const auto g = gen_synthetic_classes(10, 16, 100, 2.0, rng);
  EXPECT_EQ(g.size(), 1000u);
  ASSERT_EQ(g.pools.size(), 10u);
  for (const auto& p : g.pools) {
    EXPECT_EQ(p.rows, 100u);
    EXPECT_EQ(p.cols, 16u);
  }
}

TEST(GenSyntheticTest, SameSeedSameData) {
  Rng a(5), b(5);
  const auto ga = gen_synthetic_classes(4, 3, 20, 1.0, a);
  const auto gb = gen_synthetic_classes(4, 3, 20, 1.0, b);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(ga.pools[c], gb.pools[c]);
}

TEST(GenSyntheticTest, LargeSpreadIsSeparable) {
  Rng rng(7);
  const auto g = gen_synthetic_classes(10, 16, 200, 10.0, rng);
  LabeledBatch train, test;
  train.features = Matrix(10 * 150, 16);
  test.features = Matrix(10 * 50, 16);
  for (std::size_t c = 0; c < 10; ++c)
    for (std::size_t r = 0; r < 200; ++r) {
      auto& dst = r < 150 ? train : test;
      const std::size_t row = r < 150 ? c * 150 + r : c * 50 + (r - 150);
      auto src = g.pools[c].row(r);
      std::copy(src.begin(), src.end(), dst.features.row(row).begin());
    }
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t r = 0; r < 150; ++r) train.labels.push_back(static_cast<std::uint32_t>(c));
    for (std::size_t r = 0; r < 50; ++r) test.labels.push_back(static_cast<std::uint32_t>(c));
  }
  Rng init(1);
  auto w = init_weights(MlpSpec{{16, 32, 10}, Activation::kRelu}, init);
  Rng tr(2);
  w = sgd_train(w, train, TrainerParams{5, 0.05, 32}, tr);
  EXPECT_GT(evaluate_accuracy(w, test), 0.95);
}

TEST(LabelWeightsTest, HierarchicalExample) {
  const auto w = archetype_label_weights(hier(3, 0.6), 10);
  const std::vector<double> expect{0.1, 0.1, 0.1, 0.6, 0.1, 0, 0, 0, 0, 0};
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(w[j], expect[j], 1e-15);
}

TEST(LabelWeightsTest, FullBiasIsOneHot) {
  const auto w = archetype_label_weights(hier(2, 1.0), 10);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(w[j], j == 2 ? 1.0 : 0.0);
}

TEST(LabelWeightsTest, HierarchicalSumsToOneInsideMeta) {
  for (double b : {0.2, 0.45, 0.6, 0.65, 0.7}) {
    const auto w = archetype_label_weights(HierarchicalArchetype{{5, 6, 7, 8, 9}, 7, b}, 10);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(w[j], 0.0);
  }
}

TEST(LabelWeightsTest, HypergeometricFollowsPmf) {
  const auto w = archetype_label_weights(HypergeometricArchetype{110, 5, 10}, 10);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  // K=5 puts no mass on k >= 6, so nothing is folded and no renormalization
  // is needed.
  for (std::int64_t k = 0; k < 10; ++k) EXPECT_NEAR(w[k], hypergeom_pmf(110, 5, 10, k), 1e-15);
}

TEST(LabelWeightsTest, HypergeometricFoldsTopIntoLastLabel) {
  const auto w = archetype_label_weights(HypergeometricArchetype{110, 105, 10}, 10);
  EXPECT_NEAR(w[9], hypergeom_pmf(110, 105, 10, 9) + hypergeom_pmf(110, 105, 10, 10), 1e-15);
}

TEST(LabelWeightsTest, InvalidArchetypesRejected) {
  EXPECT_THROW(archetype_label_weights(hier(7, 0.6), 10), std::invalid_argument);
  EXPECT_THROW(archetype_label_weights(hier(1, 1.5), 10), std::invalid_argument);
  EXPECT_THROW(archetype_label_weights(HypergeometricArchetype{10, 11, 2}, 10),
               std::invalid_argument);
}

TEST(ApportionTest, CountsAlwaysSumToTotal) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> w(n);
    for (double& v : w) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) w[0] = 1.0;
    const std::size_t total = rng.below(5000);
    const auto c = apportion(w, total);
    ASSERT_EQ(std::accumulate(c.begin(), c.end(), std::size_t{0}), total);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      ASSERT_LE(std::abs(static_cast<double>(c[j]) - w[j] / sum * total), 1.0 + 1e-9);
      if (w[j] == 0.0) ASSERT_EQ(c[j], 0u);
    }
  }
}

GlobalDataset small_world(std::size_t per_class) {
  Rng rng(11);
  return gen_synthetic_classes(10, 4, per_class, 2.0, rng);
}

TEST(BuildShardsTest, HierarchicalCountsAreExact) {
  const auto g = small_world(3500);
  const std::vector<DeviceArchetype> specs{{3, hier(3, 0.6)}};
  const auto shards = build_device_shards(g, specs, ShardOptions{5000, 0.2, 0.2}, 1);
  ASSERT_EQ(shards.size(), 1u);
  std::vector<std::size_t> per_label(10, 0);
  for (std::size_t c = 0; c < 10; ++c)
    per_label[c] = shards[0].train_rows[c].size() + shards[0].val_rows[c].size() +
                   shards[0].test_rows[c].size();
  EXPECT_EQ(per_label, (std::vector<std::size_t>{500, 500, 500, 3000, 500, 0, 0, 0, 0, 0}));
  // Stratified split keeps the training mix exactly on recipe.
  std::vector<std::size_t> train_counts(10, 0);
  for (auto y : shards[0].train.labels) ++train_counts[y];
  EXPECT_EQ(train_counts, (std::vector<std::size_t>{300, 300, 300, 1800, 300, 0, 0, 0, 0, 0}));
}

TEST(BuildShardsTest, OneHotGivesSingleLabel) {
  const auto g = small_world(200);
  const auto shards =
      build_device_shards(g, {{2, hier(2, 1.0)}}, ShardOptions{100, 0.2, 0.2}, 2);
  for (const auto* b : {&shards[0].train, &shards[0].val, &shards[0].test})
    for (auto y : b->labels) EXPECT_EQ(y, 2u);
}

TEST(BuildShardsTest, SplitsAreDisjointAndReproducible) {
  const auto g = small_world(400);
  Rng rng(4);
  const auto pop = hierarchical_population(10, 2, 3, 0.6, 0.7, rng);
  const auto a = build_device_shards(g, pop, ShardOptions{300, 0.2, 0.2}, 9);
  const auto b = build_device_shards(g, pop, ShardOptions{300, 0.2, 0.2}, 9);
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t d = 0; d < a.size(); ++d) {
    EXPECT_EQ(shard_hash(a[d]), shard_hash(b[d]));
    EXPECT_EQ(a[d].train.size() + a[d].val.size() + a[d].test.size(), 300u);
    for (std::size_t c = 0; c < 10; ++c) {
      std::set<std::size_t> seen;
      for (const auto* rows : {&a[d].train_rows[c], &a[d].val_rows[c], &a[d].test_rows[c]})
        for (auto r : *rows) EXPECT_TRUE(seen.insert(r).second) << "device " << d;
    }
  }
}

TEST(BuildShardsTest, DeviceStreamsIndependentOfPopulationOrder) {
  const auto g = small_world(200);
  const std::vector<DeviceArchetype> pop{{0, hier(0, 0.6)}, {1, hier(1, 0.6)}};
  const auto full = build_device_shards(g, pop, ShardOptions{100, 0.2, 0.2}, 3);
  const auto first = build_device_shards(g, {pop[0]}, ShardOptions{100, 0.2, 0.2}, 3);
  EXPECT_EQ(shard_hash(full[0]), shard_hash(first[0]));
}

TEST(BuildShardsTest, InsufficientPoolThrows) {
  const auto g = small_world(50);
  EXPECT_THROW(build_device_shards(g, {{3, hier(3, 0.6)}}, ShardOptions{200, 0.2, 0.2}, 1),
               std::invalid_argument);
}

TEST(BuildShardsTest, BadFractionsThrow) {
  const auto g = small_world(50);
  EXPECT_THROW(build_device_shards(g, {{3, hier(3, 0.6)}}, ShardOptions{20, 0.6, 0.5}, 1),
               std::invalid_argument);
}

TEST(PopulationTest, HierarchicalLayout) {
  Rng rng(8);
  const auto pop = hierarchical_population(10, 2, 3, 0.6, 0.7, rng);
  ASSERT_EQ(pop.size(), 30u);
  for (std::size_t d = 0; d < 30; ++d) {
    const auto& h = std::get<HierarchicalArchetype>(pop[d].spec);
    EXPECT_EQ(pop[d].archetype_id, d / 3);
    EXPECT_EQ(h.focus_label, d / 3);
    EXPECT_GE(h.bias, 0.6);
    EXPECT_LT(h.bias, 0.7);
    EXPECT_EQ(*h.meta_labels.begin(), d < 15 ? 0u : 5u);
  }
}

TEST(LoadCsvTest, ReadsLabelsFromLastColumn) {
  const auto path = std::filesystem::temp_directory_path() / "fedcd_load_csv_test.csv";
  {
    std::ofstream out(path);
    out << "0.5,1.0,2\n-1,3.5,0\n\n2,2,2\n";
  }
  const auto g = load_dataset_csv(path);
  EXPECT_EQ(g.num_classes, 3u);
  EXPECT_EQ(g.feature_dim, 2u);
  EXPECT_EQ(g.pools[2].rows, 2u);
  EXPECT_EQ(g.pools[1].rows, 0u);
  EXPECT_EQ(g.pools[0](0, 1), 3.5);
  {
    std::ofstream out(path);
    out << "0.5,1.0,2\n1,x,0\n";
  }
  EXPECT_THROW(load_dataset_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fedcd
