#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fedcd {

/// SplitMix64 finalizer. Used both as a bit mixer for seed derivation and
/// as the step function of `Rng`.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over a purpose string; folded into seed derivation.
constexpr std::uint64_t hash_purpose(std::string_view purpose) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a root seed, a purpose string and
/// an arbitrary list of integer keys (round, device id, model id, ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                          std::span<const std::uint64_t> keys = {});

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> keys) {
  return derive_seed(root, purpose,
                     std::span<const std::uint64_t>(keys.begin(), keys.size()));
}

/// Small deterministic generator (xoshiro256**), seeded through splitmix64.
/// All distributions are implemented here so that streams are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Unbiased uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedcd
