// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace qscale::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// SplitMix64 output finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Keyed PRF of a (seed, id) pair. Pure integer arithmetic, so the value is
// identical on every platform.
constexpr std::uint64_t key2(std::uint64_t seed, std::uint64_t id) noexcept {
  return mix64(mix64(seed + kGolden) ^ (id + 0x94D049BB133111EBull));
}

constexpr std::uint64_t key3(std::uint64_t seed, std::uint64_t a,
                             std::uint64_t b) noexcept {
  return key2(key2(seed, a), b);
}

// Map 64 random bits to a double in [0, 1) using the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based SplitMix64 stream.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  double next_unit() noexcept { return to_unit(next_u64()); }

  // Uniform integer in [0, n) by 128-bit multiply-shift. Bias is n / 2^64.
  std::uint64_t next_below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; u1 shifted into (0, 1].
  double next_normal() noexcept {
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace qscale::rng
