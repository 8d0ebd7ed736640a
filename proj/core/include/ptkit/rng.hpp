#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace ptkit {

// Deterministic random source. The standard library's distributions and
// std::shuffle are implementation-defined, which would break the replayable
// run contracts, so the draw algorithms are pinned here: splitmix64 state
// updates, rejection sampling for bounded ints, Box-Muller for normals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  uint64_t uniform(uint64_t bound) {
    // rejection sampling to avoid modulo bias
    uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  int uniform_int(int bound) { return static_cast<int>(uniform(static_cast<uint64_t>(bound))); }

  /// Uniform double in [0, 1).
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform_real();
    } while (u1 <= 0.0);
    double u2 = uniform_real();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle with pinned draw order.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = uniform(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Deterministic sample of k distinct indices from [0, n), in draw order.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    if (k > n) k = n;
    std::vector<size_t> picked;
    picked.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + uniform(n - i);
      std::swap(pool[i], pool[j]);
      picked.push_back(pool[i]);
    }
    return picked;
  }

 private:
  uint64_t state_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Stable mixing of a base seed with a stream index (epoch number, partition
/// index, ...) so derived streams do not collide.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return seed ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
}

}  // namespace ptkit
