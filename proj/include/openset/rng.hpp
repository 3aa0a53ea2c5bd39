#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace openset {

// All randomness flows through mt19937_64 plus the explicit mappings below.
// The standard pins the mt19937_64 output sequence, while the std::*
// distributions are implementation-defined, so rolling uniform/normal by hand
// keeps seeded runs byte-identical across platforms.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-stream seed for (base seed, component tag, index). Distinct tags or
// indices give decorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t state = base ^ fnv1a64(tag) ^ (index * 0x9e3779b97f4a7c15ULL);
  splitmix64(state);
  return splitmix64(state);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view tag,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(base, tag, index));
}

// Unbiased draw in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// One standard normal via Box-Muller (second member of the pair discarded).
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform_double(rng);
  while (u1 <= 0.0) u1 = uniform_double(rng);
  const double u2 = uniform_double(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace openset
