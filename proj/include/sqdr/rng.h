#pragma once

#include <cstdint>
#include <string_view>

namespace sqdr {

// Counter-based SplitMix64 stream. The n-th draw is Mix(seed + (n+1)*gamma),
// so the sequence is a pure function of (seed, n) on every platform. The
// standard-library distributions are avoided on purpose: their output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  // Standard normal via Box-Muller (one value per two draws, no caching).
  double Normal();
  // Uniform integer in [0, n). n must be > 0.
  uint64_t Below(uint64_t n);

  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

uint64_t Mix64(uint64_t z);

// Derives a stream seed from (seed, purpose) with FNV-1a over the purpose
// string folded through Mix64. Used so every consumer of randomness gets an
// independent stream keyed by a single user-facing seed.
uint64_t DeriveSeed(uint64_t seed, std::string_view purpose);
uint64_t DeriveSeed(uint64_t seed, std::string_view purpose, uint64_t index);

}  // namespace sqdr
