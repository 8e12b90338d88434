#pragma once

#include <cstdint>
#include <span>

namespace sgs {

// Deterministic 64-bit generator (splitmix64). The same seed yields the same
// value stream on every platform; streams are single-owner and not
// thread-safe. Normal variates come from an explicit Box-Muller transform so
// the stream does not depend on a library distribution implementation.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53 random bits.
  double next_unit();

  double uniform(double lo, double hi);

  // Standard normal, Box-Muller with pair caching.
  double normal();

  void fill_normal(std::span<double> out, double mean = 0.0, double stddev = 1.0);
  void fill_uniform(std::span<double> out, double lo, double hi);

  // Derives an independent stream seed, e.g. one per clip id.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace sgs
