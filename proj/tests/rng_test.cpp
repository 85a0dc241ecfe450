#include "fedcd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

namespace fedcd {
namespace {

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTest, DerivedSeedsDependOnPurposeAndKeys) {
  std::set<std::uint64_t> seen;
  seen.insert(derive_seed(1, "train", {1, 2, 3}));
  seen.insert(derive_seed(1, "train", {1, 2, 4}));
  seen.insert(derive_seed(1, "select", {1, 2, 3}));
  seen.insert(derive_seed(2, "train", {1, 2, 3}));
  seen.insert(derive_seed(1, "train", {3, 2, 1}));
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_EQ(derive_seed(7, "x", {9}), derive_seed(7, "x", {9}));
}

TEST(RngTest, UniformMomentsAndRange) {
  Rng r(3);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(RngTest, NormalMoments) {
  Rng r(5);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(RngTest, BelowIsUnbiased) {
  Rng r(11);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
}

}  // namespace
}  // namespace fedcd
