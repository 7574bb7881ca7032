#pragma once

#include "kval/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace kval {

std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull);

/// Counter-based integer generator. Unlike std::mt19937 + distributions, the
/// double stream is pinned to exact IEEE operations, so outputs are
/// bit-identical across platforms.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [-1, 1), exactly representable (dyadic rational).
  double next_signed_unit() {
    return static_cast<double>(next() >> 11) * 0x1p-52 - 1.0;
  }

  /// Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1p-53; }
};

/// Deterministic unit vector derived from a word. Same word, dimension and
/// seed give the same vector on every platform.
Vec hashed_unit_vector(std::string_view word, int dim, std::uint64_t seed);

void log_warn(const std::string& message);
void log_info(const std::string& message);

std::string iso8601_utc_now();

}  // namespace kval
