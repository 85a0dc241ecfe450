#pragma once

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "fedcd/rng.hpp"

namespace fedcd {

using BigRational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Exact binomial coefficient; 0 when k > n or either argument is negative.
BigInt binomial(std::int64_t n, std::int64_t k);

/// P[X = k] for X ~ Hypergeometric(population N, successes K, draws n), as
/// an exact fraction C(K,k) C(N-K,n-k) / C(N,n). Out-of-support k gives 0.
BigRational hypergeom_pmf_exact(std::int64_t N, std::int64_t K, std::int64_t n,
                                std::int64_t k);

double hypergeom_pmf(std::int64_t N, std::int64_t K, std::int64_t n,
                     std::int64_t k);

/// Draws n items without replacement from an urn of N holding K successes
/// and returns the number of successes.
std::int64_t sample_hypergeometric(std::int64_t N, std::int64_t K,
                                   std::int64_t n, Rng& rng);

}  // namespace fedcd
