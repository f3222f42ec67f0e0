#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace paralens {

/// SplitMix64 engine; satisfies UniformRandomBitGenerator so it plugs into
/// the <random> distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(*this); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(*this); }
  bool coin() { return ((*this)() >> 63) != 0; }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this); }

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

}  // namespace paralens
