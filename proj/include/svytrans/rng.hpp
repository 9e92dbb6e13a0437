#pragma once

#include <cstdint>
#include <random>

namespace svytrans {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of substream `stream` under `seed`:
///   splitmix64(splitmix64(seed) ^ splitmix64(stream + 1)).
/// Every parallel task (replication, bootstrap replicate, population chunk,
/// grid cell) draws from its own substream, so results do not depend on
/// scheduling or thread count.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 1));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// How data-parallel loops run. Serial is the reference implementation;
/// both produce identical results.
enum class Execution { Serial, Parallel };

/// Threads available to Parallel loops (1 when built without OpenMP).
int max_threads();

}  // namespace svytrans
