#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vtrack {

/// Portable seeded generator: std::mt19937_64 (its output sequence is fixed
/// by the C++ standard) with uniforms taken from the top 53 bits and normals
/// from the Box-Muller cosine branch. Standard-library distributions are not
/// used because their algorithms vary between implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal; consumes exactly two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

/// Independent stream for run `index` of a seeded batch.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vtrack
