#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

namespace fedlab {

// Deterministic splittable RNG. Every consumer derives its own stream from
// (master seed, path), so the draw order of one stream never affects another.
// This is what makes experiment replay byte-identical under any concurrency.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Burn the seed through the mixer once so nearby seeds decorrelate.
    next_u64();
  }

  // Derives an independent stream keyed by (seed, path components).
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t s = mix(seed);
    for (uint64_t p : path) s = mix(s ^ mix(p + 0x9e3779b97f4a7c15ULL));
    return Rng(s);
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), bound > 0. Rejection keeps it unbiased.
  uint64_t uniform_int(uint64_t bound) {
    uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Random sign in {-1, +1}.
  int sign_flip() { return (next_u64() & 1) ? 1 : -1; }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  uint64_t state_;
};

// Stream purposes for per-(round, client) derivations. Keeping these stable
// across protocols is what makes the DP-SignFed noiseless limit reproduce
// SignFed bit-for-bit.
enum StreamPurpose : uint64_t {
  kStreamInit = 1,
  kStreamClientSample = 2,
  kStreamBatch = 3,
  kStreamSignTie = 4,
  kStreamServerTie = 5,
  kStreamNoise = 6,
  kStreamMask = 7,
  kStreamAttack = 8,
  kStreamPartition = 9,
  kStreamData = 10,
};

}  // namespace fedlab
