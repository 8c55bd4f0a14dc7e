#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace smpf {

// splitmix64 finalizer; also used to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic xoshiro256++ stream. Every random decision in the library
// flows through an explicitly derived stream, so a run is reproducible from
// its master seed regardless of thread count. Distribution sampling is
// implemented here rather than with <random> because the standard leaves
// normal_distribution's algorithm unspecified.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) { reseed(seed); }

  // Derives an independent stream from a master seed and a tag path,
  // e.g. derive(seed, {kTrainTag, generation, tree_index}).
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t key = mix64(seed);
    for (std::uint64_t t : tags) {
      key = mix64(key ^ mix64(t + 0x632be59bd9b4e019ULL));
    }
    return RngStream(key);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n); n >= 1. Multiply-high mapping; the bias of
  // ~n/2^64 is far below anything observable here.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed) {
    // Expand the key with splitmix64 as recommended for xoshiro seeding.
    std::uint64_t sm = seed;
    bool nonzero = false;
    for (auto& word : s_) {
      word = mix64(sm);
      sm = word;
      nonzero |= word != 0;
    }
    if (!nonzero) s_[0] = 1;
  }

  std::uint64_t s_[4];
};

}  // namespace smpf
