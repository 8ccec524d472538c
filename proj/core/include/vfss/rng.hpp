#pragma once

#include <cstdint>
#include <string_view>

namespace vfss {

// SplitMix64 (Steele, Lea, Flood 2014). Used for every seeded draw in the
// library because its output is fully specified, unlike the std::
// distributions whose algorithms differ between standard libraries.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix(z);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  constexpr double next_double() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi) as float, 24-bit resolution.
  constexpr float next_float(float lo, float hi) noexcept {
    const float u = static_cast<float>(next() >> 40) * 0x1.0p-24f;
    return lo + (hi - lo) * u;
  }

  // Unbiased uniform integer in [0, bound) by rejection. bound must be > 0.
  constexpr std::uint64_t next_below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  // Child generator with an independent stream; advances this generator once.
  constexpr SplitMix64 split() noexcept { return SplitMix64(mix(next() ^ 0xD1B54A32D192ED03ULL)); }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a over the bytes of `text`.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Stream seed for a named sub-task: mix(master ^ mix(fnv1a64(name))).
// Depends only on its arguments, so work can be scheduled in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view name) noexcept {
  return SplitMix64::mix(master ^ SplitMix64::mix(fnv1a64(name)));
}

}  // namespace vfss
