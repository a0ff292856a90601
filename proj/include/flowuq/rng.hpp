#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flowuq {

// Deterministic draws on top of the fully specified mt19937_64 stream.
// std::uniform_*_distribution is implementation-defined, so seeded results
// would not be stable; these helpers are.

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  // rejection sampling, unbiased
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Laplace(mu, b) draw by inverse CDF.
inline double laplace_sample(std::mt19937_64& rng, double mu, double b) {
  const double p = uniform_unit(rng) - 0.5;
  const double s = p < 0.0 ? -1.0 : 1.0;
  return mu - b * s * std::log(1.0 - 2.0 * std::abs(p));
}

/// Standard normal draw (Box-Muller, one value per call).
inline double normal_sample(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace flowuq
