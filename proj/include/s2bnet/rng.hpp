#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace s2b::rng {

// mt19937_64 is fully specified by the standard, so raw draws are portable.
// The std distributions are not; the helpers below replace them.
using Engine = std::mt19937_64;

inline Engine make(uint64_t seed) { return Engine(seed); }

// Derives an independent stream for (seed, lane), e.g. one per epoch.
inline Engine make_stream(uint64_t seed, uint64_t lane) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (lane + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return Engine(z ^ (z >> 31));
}

// Uniform in [0, 1), 53-bit resolution.
inline double unit(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& g, double lo, double hi) {
  return lo + (hi - lo) * unit(g);
}

// Standard normal via Box-Muller; consumes exactly two draws.
inline double normal(Engine& g) {
  const double u1 = 1.0 - unit(g);  // (0, 1]
  const double u2 = unit(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

// Uniform index in [0, n) via 128-bit multiply (negligible bias, portable).
inline int64_t index(Engine& g, int64_t n) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(g()) *
                                 static_cast<unsigned __int128>(n);
  return static_cast<int64_t>(wide >> 64);
}

template <class It>
void shuffle(It first, It last, Engine& g) {
  const int64_t n = static_cast<int64_t>(last - first);
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = index(g, i + 1);
    std::swap(first[i], first[j]);
  }
}

}  // namespace s2b::rng
