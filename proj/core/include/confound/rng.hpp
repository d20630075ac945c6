#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace confound {

using Seed = std::uint64_t;
using Engine = std::mt19937_64;

inline constexpr Seed kDefaultSeed = 42;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent seed for a labelled substream ("shuffle",
/// "dropout", an image id, ...). Same (parent, label) always yields the
/// same child.
constexpr Seed derive_seed(Seed parent, std::string_view label) {
  return splitmix64(splitmix64(parent) ^ fnv1a64(label));
}

constexpr Seed derive_seed(Seed parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) + 0x632be59bd9b4e019ULL * (index + 1));
}

inline Engine make_engine(Seed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

// Uniform double in [lo, hi) computed from raw engine bits, so the stream
// does not depend on the standard library's distribution implementation.
inline double uniform(Engine& eng, double lo, double hi) {
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Index in [0, n) by multiply-shift on 64 random bits.
inline std::size_t uniform_index(Engine& eng, std::size_t n) {
  __extension__ using U128 = unsigned __int128;
  return static_cast<std::size_t>((static_cast<U128>(eng()) * n) >> 64);
}

// Fisher-Yates driven by uniform_index.
template <class T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(eng, i)]);
}

}  // namespace confound
