#include "fedcd/hypergeom.hpp"

#include <stdexcept>

namespace fedcd {

namespace {
void check_bounds(std::int64_t N, std::int64_t K, std::int64_t n) {
  if (N < 0 || K < 0 || K > N || n < 0 || n > N)
    throw std::invalid_argument("hypergeometric parameters need 0<=K<=N, 0<=n<=N");
}
}  // namespace

BigInt binomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

BigRational hypergeom_pmf_exact(std::int64_t N, std::int64_t K, std::int64_t n,
                                std::int64_t k) {
  check_bounds(N, K, n);
  if (k < 0 || k > n || k > K || n - k > N - K) return 0;
  return BigRational(binomial(K, k) * binomial(N - K, n - k), binomial(N, n));
}

double hypergeom_pmf(std::int64_t N, std::int64_t K, std::int64_t n,
                     std::int64_t k) {
  return static_cast<double>(hypergeom_pmf_exact(N, K, n, k));
}

std::int64_t sample_hypergeometric(std::int64_t N, std::int64_t K,
                                   std::int64_t n, Rng& rng) {
  check_bounds(N, K, n);
  std::int64_t remaining = N, successes = K, hits = 0;
  for (std::int64_t d = 0; d < n; ++d) {
    if (static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(remaining))) <
        successes) {
      ++hits;
      --successes;
    }
    --remaining;
  }
  return hits;
}

}  // namespace fedcd
