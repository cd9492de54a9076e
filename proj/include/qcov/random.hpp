// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

namespace qcov {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford variant 13). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Key of the stream for `replica` under `seed`. Streams for distinct
/// (seed, replica) pairs are decorrelated by two rounds of the finalizer.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica) {
  return mix64(mix64(seed + kGolden) ^ mix64(replica * kGolden + 0xD1B54A32D192ED03ULL));
}

/// Seed of sub-experiment `index` under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64((index + 1) * 0xA0761D6478BD642FULL));
}

/// Counter-based uniform stream: draw k of key K is mix64(K + (k+1)*golden),
/// i.e. SplitMix64 started at K. The output depends only on (key, k), so any
/// replica can be regenerated without replaying other replicas.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform on the open interval (0, 1), 53 bits.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Standard normal draws by the Marsaglia polar method on a CounterStream.
/// Pairs are produced together; the second value of each pair is cached.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t key) : uniforms_(key) {}

  double next() {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniforms_.next_uniform() - 1.0;
      v = 2.0 * uniforms_.next_uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    return u * scale;
  }

 private:
  CounterStream uniforms_;
  std::optional<double> spare_;
};

}  // namespace qcov
