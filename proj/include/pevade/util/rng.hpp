#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pevade/util/bytes.hpp"

namespace pevade {

// Seeded pseudo-random stream. All stochastic choices in the toolkit flow
// through this wrapper rather than std distributions, so that a fixed seed
// yields byte-identical draws on every platform and standard library.
class RandomDraw {
 public:
  explicit RandomDraw(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n) by rejection sampling; n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Uniform double in [0, 1).
  double real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Log-uniform integer in [lo, hi], lo >= 1.
  std::uint64_t log_range(std::uint64_t lo, std::uint64_t hi) {
    const double u = std::log(static_cast<double>(lo)) +
                     real() * (std::log(static_cast<double>(hi)) - std::log(static_cast<double>(lo)));
    auto v = static_cast<std::uint64_t>(std::llround(std::exp(u)));
    if (v < lo) v = lo;
    if (v > hi) v = hi;
    return v;
  }

  template <typename C>
  const auto& pick(const C& pool) {
    return pool[static_cast<std::size_t>(below(pool.size()))];
  }

  std::uint8_t byte() { return static_cast<std::uint8_t>(below(256)); }

  ByteBuf bytes_uniform(std::size_t n) {
    ByteBuf out(n);
    for (auto& b : out) b = byte();
    return out;
  }

  ByteBuf bytes_repeated(std::size_t n) {
    ByteBuf out(n, byte());
    return out;
  }

  ByteBuf bytes_ascii(std::size_t n) {
    ByteBuf out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(0x20 + below(95));
    return out;
  }

  std::uint64_t fork_seed() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pevade
