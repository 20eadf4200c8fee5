#pragma once

// Counter-based generator: draw i of stream `seed` is
//   splitmix64_mix(seed + (i + 1) * 0x9E3779B97F4A7C15)
// so any draw can be recomputed from (seed, i) alone, in any language.

#include <cstdint>

namespace pausecc {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64_mix(seed + (index + 1) * kGoldenGamma);
}

// Seed for the i-th child stream of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i) noexcept {
  return splitmix64_mix(counter_draw(seed, i) ^ 0xD1B54A32D192ED03ull);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next() noexcept { return counter_draw(seed_, counter_++); }

  // Uniform in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

  // Uniform in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) noexcept {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin() noexcept { return (next() >> 63) != 0; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace pausecc
