#pragma once

#include <cstdint>
#include <random>

/// Deterministic, platform-independent sampling helpers.  std::mt19937_64 has
/// a pinned bit stream, and the mappings below avoid std::uniform_real_
/// distribution (whose output is implementation-defined).
namespace morphrom {

/// Uniform double in [0,1) from the top 53 bits of one engine draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Radical-inverse (Halton) sequence value for a 1-based index.
inline double halton(uint64_t index, uint32_t base) {
  double f = 1.0, value = 0.0;
  while (index > 0) {
    f /= base;
    value += f * static_cast<double>(index % base);
    index /= base;
  }
  return value;
}

}  // namespace morphrom
