#pragma once

#include <cstdint>
#include <random>

namespace smile {

/// splitmix64 mix; used to derive independent sub-seeds from one run seed so
/// that adding a consumer never shifts the draws of another.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class RngStream : std::uint64_t {
  Abundance = 1,
  Endmembers = 2,
  Noise = 3,
  Vca = 4,
  UnmixInit = 5,
  SrInit = 6,
  NoiseInputs = 7,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace smile
