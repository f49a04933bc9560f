#pragma once

// Tiny deterministic RNG utilities. splitmix64 gives portable, platform
// independent streams; the counter form makes per-voxel noise a pure
// function of (seed, index) so parallel generation order cannot matter.

#include <cstdint>

namespace bxfuse {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Map a 64-bit hash onto (0, 1); never exactly 0, safe under log().
inline double uniform01(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

/// Sequential splitmix64 stream for scene-level parameters.
struct SplitMix {
  std::uint64_t state;
  explicit SplitMix(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() { return state = mix64(state); }
  double next01() { return uniform01(next()); }
  double range(double lo, double hi) { return lo + (hi - lo) * next01(); }
};

}  // namespace bxfuse
