#include "sgs/rng.hpp"

#include <cmath>
#include <numbers>

namespace sgs {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeededRng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix(state_);
}

double SeededRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

double SeededRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // u1 must be nonzero for the log; next_unit() is in [0, 1).
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(angle);
  has_cached_normal_ = true;
  return r * std::cos(angle);
}

void SeededRng::fill_normal(std::span<double> out, double mean, double stddev) {
  for (double& v : out) v = mean + stddev * normal();
}

void SeededRng::fill_uniform(std::span<double> out, double lo, double hi) {
  for (double& v : out) v = uniform(lo, hi);
}

std::uint64_t SeededRng::derive(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 0x9E3779B97F4A7C15ULL));
}

}  // namespace sgs
