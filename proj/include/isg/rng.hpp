#pragma once

#include <cstdint>

namespace isg::rng {

// SplitMix64 finalizer. All sampling randomness is derived statelessly from
// hashed (seed, index...) tuples, so a draw depends only on its key and never
// on scheduling order or thread count.
inline constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  return mix(mix(mix(mix(seed) ^ a) ^ b) ^ c);
}

// Uniform double in [0, 1) from 53 high bits.
inline constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline constexpr double uniform(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  return to_unit(key(seed, a, b, c));
}

// Independent stream for a named purpose (replica chains, eval draws, ...).
inline constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) noexcept {
  return key(seed, tag, 0x73747265616dULL);
}

}  // namespace isg::rng
