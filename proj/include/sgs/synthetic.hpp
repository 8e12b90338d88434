#pragma once

#include <cstdint>
#include <string>

#include "sgs/tensor.hpp"

namespace sgs {

// Synthetic clip regimes:
//   redundant: one N(0,1) base frame repeated T times plus N(0, sigma^2) noise
//   diverse:   T independent N(0,1) frames
//   drifting:  linear interpolation between two N(0,1) endpoint frames
enum class Regime { kRedundant, kDiverse, kDrifting };

Regime parse_regime(const std::string& name);
std::string regime_name(Regime r);

struct SyntheticSpec {
  std::size_t t = 1, c = 1, h = 1, w = 1;
  Regime regime = Regime::kDiverse;
  double sigma = 0.0;  // noise level, redundant regime only
  std::uint64_t seed = 42;
};

// Deterministic in spec.seed.
FeatureSequence gen_clip(const SyntheticSpec& spec);

}  // namespace sgs
