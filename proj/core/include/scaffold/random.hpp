#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace scaffold {

using Rng = std::mt19937_64;

/// Mixes a base seed with a path of identifiers (problem, step, round,
/// rollout index, ...) into an independent stream seed. Pure function of its
/// inputs, so any stream can be regenerated in isolation.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace scaffold
