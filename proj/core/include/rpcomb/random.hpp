#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace rpcomb {

/// Stateless 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Combines a base seed with an ordered list of integer keys into a new seed.
/// Used to give every (replication, stage, index) its own isolated stream.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> keys) noexcept;

/// Counter-based generator: draw k of stream `key` is mix64(key + k * gamma).
/// Any draw can be recomputed from (key, k) alone, which keeps projections and
/// splits reproducible regardless of evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;

  /// Uniform integer on [0, bound), bound > 0. Unbiased (rejection).
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

  /// Random-access standard normal: the `index`-th Gaussian of stream `seed`.
  static double normal_at(std::uint64_t seed, std::uint64_t index) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace rpcomb
