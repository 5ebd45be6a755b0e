#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ecoassoc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Seed of a named, indexed sub-stream. Streams derived from the same root
/// seed are independent of the order in which they are created, which keeps
/// parallel per-site simulation reproducible.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view name,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ hash_name(name)) + splitmix64(index + 0x632BE59BD9B4E019ULL));
}

inline Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(root, name, index));
}

/// Uniform on [0,1) from the top 53 bits; portable across standard libraries.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng &rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t uniform_index(Rng &rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline bool bernoulli(Rng &rng, double p) { return uniform01(rng) < p; }

template <class It> void shuffle(It first, It last, Rng &rng) {
  auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

} // namespace ecoassoc
