#ifndef MBF_RNG_HPP
#define MBF_RNG_HPP

#include <cmath>
#include <cstdint>

namespace mbf {

/// SplitMix64 (Steele/Lea/Flood). Splittable 64-bit generator; per-run
/// streams are seeded with base_seed + run_index, which places their start
/// points ~2^63 apart along the generator orbit.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Exponential(rate) by inverse CDF on (0, 1), so holding times are
  /// strictly positive and event timestamps strictly increase.
  double next_exponential(double rate) {
    const double u = (double(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    return -std::log1p(-u) / rate;
  }

 private:
  std::uint64_t state_;
};

}  // namespace mbf

#endif  // MBF_RNG_HPP
