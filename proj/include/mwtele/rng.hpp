#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so results do not depend on evaluation order.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace mwtele {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t bits(std::uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Pair of independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  std::uint64_t key_;
};

}  // namespace mwtele
