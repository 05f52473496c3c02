#pragma once

#include <cstdint>
#include <random>

#include "cconv/domain.hpp"
#include "cconv/linalg.hpp"

namespace cconv {

/// Seeded generator whose output is identical across standard libraries:
/// the distribution mapping is done here, not by <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t index(std::uint64_t n) { return engine_() % n; }
  double normal();

  Vec unit_vector(int n);
  Vec point_in(const Region& region);

  /// Derive an independent stream for a shard; keeps shards reproducible.
  Rng split(std::uint64_t salt) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace cconv
