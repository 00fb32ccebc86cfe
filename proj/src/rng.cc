#include "sqdr/rng.h"

#include <cmath>
#include <numbers>

namespace sqdr {

namespace {
constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t Rng::NextU64() {
  ++counter_;
  return Mix64(seed_ + counter_ * kGamma);
}

double Rng::Uniform01() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Rng::Normal() {
  // 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - Uniform01();
  const double u2 = Uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t Rng::Below(uint64_t n) {
  // Rejection sampling removes modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

uint64_t DeriveSeed(uint64_t seed, std::string_view purpose) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return Mix64(seed ^ Mix64(h));
}

uint64_t DeriveSeed(uint64_t seed, std::string_view purpose, uint64_t index) {
  return Mix64(DeriveSeed(seed, purpose) + (index + 1) * kGamma);
}

}  // namespace sqdr
