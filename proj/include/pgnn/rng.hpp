#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace pgnn::rng {

// Counter-based deterministic randomness. Every draw is a pure function of
// (seed, counter), so streams are reproducible across platforms and
// independent of draw order — std::normal_distribution is
// implementation-defined and would break bit-exact reruns.

namespace detail {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// splitmix64 finalizer
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash2(std::uint64_t seed, std::uint64_t counter) {
  return mix(mix(seed) ^ (counter * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

// [0, 1) with 53-bit resolution
inline double to_u01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Box-Muller cosine branch from two hash words
inline double gauss(std::uint64_t h1, std::uint64_t h2) {
  const double u1 = static_cast<double>((h1 >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = to_u01(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Keeps the indexed-noise slot space disjoint from Prng stream slots that
// happen to share a seed value.
inline constexpr std::uint64_t kNoiseDomain = 0xA5C1E7F3D96B0482ULL;

}  // namespace detail

// Uniform in [0, 1).
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  return detail::to_u01(detail::hash2(seed, counter));
}

// Standard normal addressed by index: draw k is a function of (seed, k)
// alone, independent of any draw order. Used for reproducible noise fields.
inline double normal_at(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t s = seed ^ detail::kNoiseDomain;
  return detail::gauss(detail::hash2(s, 2 * index), detail::hash2(s, 2 * index + 1));
}

// Stateful stream over the counter-based source. The full state is
// (seed, counter); both are plain integers, which is what lets checkpoints
// resume the stream exactly. Each draw consumes fresh counter slots, so
// mixed uniform/normal/index streams never reuse a slot.
class Prng {
 public:
  explicit Prng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  double next_uniform01() { return uniform01(seed_, counter_++); }

  double next_normal() {
    const std::uint64_t h1 = detail::hash2(seed_, counter_);
    const std::uint64_t h2 = detail::hash2(seed_, counter_ + 1);
    counter_ += 2;
    return detail::gauss(h1, h2);
  }

  // Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant here.
  std::uint64_t next_index(std::uint64_t n) {
    return detail::hash2(seed_, counter_++) % n;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace pgnn::rng
