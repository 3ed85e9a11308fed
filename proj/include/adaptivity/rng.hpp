#pragma once

#include <cmath>
#include <cstdint>

namespace adaptivity {

// Counter-mode generator built on the SplitMix64 finalizer.  A generator is
// identified by (seed, stream); draw i is mix(key + i * GAMMA) where
// key = mix(seed ^ mix(stream)).  Streams never share state, so environment,
// learner and design learning can draw concurrently from one seed.  The exact
// constants are documented in the README for cross-language replay.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream))), counter_(0) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Stream tags used by the harness to split one master seed.
namespace streams {
constexpr std::uint64_t kTheta = 1;
constexpr std::uint64_t kNoise = 2;
constexpr std::uint64_t kLearner = 3;
constexpr std::uint64_t kContextBase = 0x8000000000000000ull;  // + time step
}  // namespace streams

}  // namespace adaptivity
