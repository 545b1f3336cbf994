#pragma once

#include <cstdint>
#include <random>

namespace grt {

// splitmix64; used to derive independent stream seeds from (seed, ids...).
inline std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = hash_mix(seed);
  h = hash_mix(h ^ a);
  h = hash_mix(h ^ b);
  h = hash_mix(h ^ c);
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
  return Rng(stream_seed(seed, a, b, c));
}

}  // namespace grt
