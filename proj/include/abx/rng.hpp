#pragma once

#include <cstdint>
#include <string_view>

namespace abx {

// Identifier written into every output that depends on sampled randomness.
inline constexpr std::string_view kRngAlgorithm = "splitmix64-ctr/v1";

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// FNV-1a, used to fold strings (language codes, mode names) into seeds.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Folds one more value into a running seed. Order-sensitive.
constexpr std::uint64_t seed_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value + kGolden));
}

// Counter-based generator: output j of stream `key` is mix64(key + (j+1)*golden),
// so any draw is addressable without replaying earlier ones.
class counter_rng {
 public:
  constexpr explicit counter_rng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  constexpr std::uint64_t next() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with rejection.
  std::uint64_t uniform(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Independent sub-stream for item `index` of the stream keyed by `seed`.
constexpr counter_rng substream(std::uint64_t seed, std::uint64_t index) noexcept {
  return counter_rng{seed_combine(seed, index)};
}

}  // namespace abx
