#pragma once

#include <cstdint>
#include <string_view>

namespace pevade {

// 64-bit FNV-1a. Used for all feature-hashing bins; must never change once
// models have been trained, since bin assignments are part of the feature
// contract.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view key) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : key) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::size_t hash_bin(std::string_view key, std::size_t bins) {
  return static_cast<std::size_t>(fnv1a64(key) % bins);
}

// Seed mixer for deriving independent child RNG streams from one master
// seed plus a purpose label.
inline std::uint64_t mix_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = fnv1a64(label);
  h ^= master + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t h = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (salt >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  h ^= master + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

}  // namespace pevade
