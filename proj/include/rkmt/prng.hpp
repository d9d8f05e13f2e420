#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rkmt {

// splitmix64. The update and output steps are pinned in docs/FORMATS.md so
// that sampling and synthesis can be reproduced bit for bit from any
// language; do not swap this for a library generator.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). Plain modulo, as documented; the bias is
  // immaterial for bounds far below 2^64.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    while (u1 == 0.0) u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives an independent stream seed from (seed, a, b); used to give each
// synthesized (step, layer) cell its own generator.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0) {
  SplitMix64 gen(seed ^ (a * 0x9E3779B97F4A7C15ULL) ^
                 (b * 0xC2B2AE3D27D4EB4FULL));
  return gen.next();
}

}  // namespace rkmt
