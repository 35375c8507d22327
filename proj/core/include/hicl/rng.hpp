#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace hicl {

/// Seedable generator used for every stochastic step (sampling, masking,
/// contrastive groups, parameter init).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The mapping to bounded integers and reals is done here
/// rather than through std::*_distribution (whose algorithms are
/// implementation-defined), so a seed reproduces the same draws on any
/// conforming toolchain:
///   - uniform_index(n): rejection sampling on the top bits, threshold
///     2^64 - (2^64 mod n).
///   - uniform_real(): top 53 bits scaled by 2^-53, range [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double uniform_real();
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  /// k distinct indices from [0, n) via a partial Fisher-Yates shuffle,
  /// in draw order. Requires k <= n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Derives an independent child seed; used to give sub-steps their own stream.
  std::uint64_t fork_seed() { return next_u64() ^ 0x9E3779B97F4A7C15ULL; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hicl
