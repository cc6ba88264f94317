#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace arrayloc {

/// splitmix64 step; used to derive independent substreams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Substream seed for (seed, stream): stable across runs and platforms.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream + 0x632be59bd9b4e019ull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(substream(seed, stream));
}

/// Uniform double in [0, 1) derived from a counter; identical draws for
/// identical (seed, a, b) regardless of evaluation order.
inline double counter_uniform(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b) {
  std::uint64_t h = mix_seed(substream(seed, a) ^ mix_seed(b));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Standard normal pair via Box-Muller on counter-derived uniforms.
inline void counter_normal_pair(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b, double& z0, double& z1) {
  double u1 = counter_uniform(seed, a, b * 2 + 1);
  double u2 = counter_uniform(seed, a, b * 2 + 2);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  z0 = r * std::cos(6.283185307179586476925286766559 * u2);
  z1 = r * std::sin(6.283185307179586476925286766559 * u2);
}

}  // namespace arrayloc
