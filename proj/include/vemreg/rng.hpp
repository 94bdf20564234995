#pragma once

#include <cstdint>

namespace vemreg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Collapses (seed, tag, a, b) into one 64-bit stream key. Used to derive
// independent RNG streams per particle / iteration / subsystem so that
// results do not depend on thread scheduling.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t k = splitmix64(s);
  s ^= tag * 0x9e3779b97f4a7c15ull;
  k ^= splitmix64(s);
  s ^= a * 0xd1b54a32d192ed03ull;
  k ^= splitmix64(s);
  s ^= b * 0x8cb92ba72f3d8dd7ull;
  k ^= splitmix64(s);
  return k;
}

// xoshiro256++ generator. Output sequence is fixed by the algorithm, not by
// the standard library, so files produced under a fixed seed are identical
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Fixed-point multiply keeps it bias-free
  // without a data-dependent loop.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

// Stream tags for the subsystems that draw random numbers.
enum class RngStream : std::uint64_t {
  kRotationSampling = 1,
  kDownsample = 2,
  kPsoUpdate = 3,
  kReseed = 4,
  kBenchmarkCamera = 5,
  kBenchmarkPerturbation = 6,
};

}  // namespace vemreg
