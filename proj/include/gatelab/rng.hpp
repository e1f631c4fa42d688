// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_RNG_HPP
#define GATELAB_RNG_HPP

#include <cstdint>
#include <cmath>

namespace gatelab {

/// Counter-based pseudo-random generator built on the SplitMix64 finalizer.
///
/// Output k of stream (seed, stream) is mix64(key + (k+1) * GOLDEN), where
/// key itself is derived by mixing seed and stream id. Draws are a pure
/// function of (seed, stream, counter), so sub-streams can be consumed in
/// any order without affecting each other's content. This is what makes
/// batch generation and probe sampling bit-reproducible regardless of
/// evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_key(seed, stream)) {}

  /// SplitMix64 finalizer (Steele, Lea, Flood 2014).
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }

  /// Standard normal via Box-Muller; the second variate of each pair is
  /// cached so consecutive calls consume exactly one pair of uniforms.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_uniform();  // (0, 1], keeps log() finite
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n) by scaling; n must be > 0 and far below 2^53.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n));
  }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream ^ 0xA5A5A5A5A5A5A5A5ull));
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gatelab

#endif  // GATELAB_RNG_HPP
