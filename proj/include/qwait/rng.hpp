#pragma once

#include <cstdint>

namespace qwait {

inline constexpr std::uint64_t kDefaultSeed = 20230521;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream key from a parent key and an index.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

// Counter-based uniform variate in [0, 1). The value depends only on the
// (seed, a, b) key, never on call order.
constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix64(derive_seed(derive_seed(seed, a), b));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace qwait
