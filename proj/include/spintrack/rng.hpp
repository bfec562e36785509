#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace spintrack {

/// 64-bit finalizer from SplitMix64 (Steele, Lea, Flood 2014).
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Child seed for stream `stream` of `parent`:
///   splitmix64(parent ^ splitmix64(stream + 0x9E3779B97F4A7C15)).
/// Streams of the same parent are statistically independent and reproducible.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept;

/// xoshiro256** generator with portable uniform and normal variates.
///
/// Every transform is written out here (no std::*_distribution), so a seed
/// produces the same stream on every platform and standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  std::uint64_t operator()() noexcept { return next(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via the Marsaglia polar method.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Uniformly random permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace spintrack
