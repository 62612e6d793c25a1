#pragma once

// Reproducible RNG streams for parallel Monte Carlo.
//
// Every stochastic object draws from an RngStream keyed by
// (master seed, population size, replication id, role). Distinct keys give
// independent streams, and a fixed key always replays the same sequence, so
// experiment output is byte-identical regardless of worker scheduling.
// Normals come from the inverse-cdf transform of a 53-bit uniform; nothing
// depends on the (implementation-defined) std distribution adaptors.

#include <cstdint>
#include <initializer_list>
#include <random>

#include "transq/special.hpp"

namespace transq {

// One stream per role keeps B^{br,n}, the dropout walk driver, the service
// walk driver and the placement randomness mutually independent.
enum class StreamRole : std::uint64_t {
  Bridge = 0x1,
  DropoutWalk = 0x2,
  ServiceWalk = 0x3,
  CellPlacement = 0x4,
  Permutation = 0x5,
  Generic = 0x6,
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t k : keys) h = mix64(h + 0x9e3779b97f4a7c15ULL + k);
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t u64() { return eng_(); }

  // Uniform strictly inside (0,1): (k + 1/2) / 2^53.
  double u01() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * u01(); }

  double normal() { return normal_quantile(u01()); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Fisher-Yates with engine-defined draws; std::shuffle is not
  // reproducible across standard libraries.
  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    using std::swap;
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = static_cast<decltype(i)>(u64() % static_cast<std::uint64_t>(i + 1));
      swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Derives the per-(replication, role) streams of one experiment.
struct StreamFactory {
  std::uint64_t master = 0;
  std::uint64_t population = 0;   // n
  std::uint64_t replication = 0;

  RngStream make(StreamRole role) const {
    return RngStream(mix_keys({master, population, replication, static_cast<std::uint64_t>(role)}));
  }
};

}  // namespace transq
