#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cbn {

// Counter-based draws: every value is a pure function of its key, so results do
// not depend on iteration order or thread count.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b) ^ c);
}

// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller from two keyed uniforms.
inline double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  double u1 = 1.0 - to_unit(hash_key(seed, a, b, 0));  // (0, 1]
  double u2 = to_unit(hash_key(seed, a, b, 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cbn
