#include "fedcd/hypergeom.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

namespace fedcd {
namespace {

TEST(HypergeomPmfTest, OutOfSupportIsZero) {
  EXPECT_EQ(hypergeom_pmf(110, 5, 10, 6), 0.0);
  EXPECT_EQ(hypergeom_pmf(110, 45, 10, 11), 0.0);
  EXPECT_EQ(hypergeom_pmf(110, 45, 10, -1), 0.0);
  // n - k larger than the failures available.
  EXPECT_EQ(hypergeom_pmf(12, 10, 5, 0), 0.0);
}

TEST(HypergeomPmfTest, EmptyDraw) { EXPECT_EQ(hypergeom_pmf(110, 45, 0, 0), 1.0); }

TEST(HypergeomPmfTest, AllSuccessesDrawn) {
  // C(105,10)/C(110,10) = 380240/618139, reduced with an independent
  // fraction calculator.
  EXPECT_EQ(hypergeom_pmf_exact(110, 105, 10, 10), BigRational(380240, 618139));
  EXPECT_NEAR(hypergeom_pmf(110, 105, 10, 10), 0.6151367249113873, 1e-15);
}

TEST(HypergeomPmfTest, SupportSumsToOneExactly) {
  for (std::int64_t K : {0, 5, 25, 45, 65, 85, 105, 110}) {
    BigRational total = 0;
    for (std::int64_t k = 0; k <= 10; ++k) total += hypergeom_pmf_exact(110, K, 10, k);
    EXPECT_EQ(total, BigRational(1)) << "K=" << K;
  }
}

TEST(HypergeomPmfTest, SymmetricInSuccessesAndDraws) {
  for (std::int64_t N : {10, 37, 110})
    for (std::int64_t K = 0; K <= N; K += 3)
      for (std::int64_t n = 0; n <= N; n += 4)
        for (std::int64_t k = 0; k <= std::min(K, n); ++k)
          ASSERT_EQ(hypergeom_pmf_exact(N, K, n, k), hypergeom_pmf_exact(N, n, K, k));
}

TEST(HypergeomPmfTest, RejectsInvalidParameters) {
  EXPECT_THROW(hypergeom_pmf(10, 11, 2, 0), std::invalid_argument);
  EXPECT_THROW(hypergeom_pmf(10, 2, 11, 0), std::invalid_argument);
}

TEST(HypergeomSamplerTest, MatchesPmfChiSquare) {
  Rng rng(2024);
  const int draws = 100000;
  std::vector<double> observed(11, 0.0);
  for (int i = 0; i < draws; ++i) observed[sample_hypergeometric(110, 45, 10, rng)] += 1;
  // Cells with expected count below 5 are pooled into one tail cell.
  double chi2 = 0.0, tail_obs = 0.0, tail_exp = 0.0;
  int cells = 0;
  for (int k = 0; k <= 10; ++k) {
    const double expected = draws * hypergeom_pmf(110, 45, 10, k);
    if (expected < 5.0) {
      tail_obs += observed[k];
      tail_exp += expected;
      continue;
    }
    chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
    ++cells;
  }
  if (tail_exp > 0.0) {
    chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
    ++cells;
  }
  const boost::math::chi_squared dist(cells - 1);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.001);
}

TEST(BinomialTest, SmallValues) {
  EXPECT_EQ(binomial(5, 2), 10);
  EXPECT_EQ(binomial(5, 6), 0);
  EXPECT_EQ(binomial(0, 0), 1);
  EXPECT_EQ(binomial(110, 10), BigInt("46897636623981"));
}

}  // namespace
}  // namespace fedcd
