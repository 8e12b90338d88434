#include "sgs/synthetic.hpp"

#include "sgs/rng.hpp"

namespace sgs {

Regime parse_regime(const std::string& name) {
  if (name == "redundant") return Regime::kRedundant;
  if (name == "diverse") return Regime::kDiverse;
  if (name == "drifting") return Regime::kDrifting;
  throw ConfigError("unknown regime '" + name + "'");
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kRedundant: return "redundant";
    case Regime::kDiverse: return "diverse";
    case Regime::kDrifting: return "drifting";
  }
  throw ConfigError("invalid regime value");
}

FeatureSequence gen_clip(const SyntheticSpec& spec) {
  if (spec.t == 0 || spec.c == 0 || spec.h == 0 || spec.w == 0) {
    throw ConfigError("clip dimensions must be positive");
  }
  if (spec.sigma < 0.0) throw ConfigError("noise level must be non-negative");

  FeatureSequence seq(spec.t, spec.c, spec.h, spec.w);
  const std::size_t frame_size = seq.frame_size();
  SeededRng rng(spec.seed);

  switch (spec.regime) {
    case Regime::kRedundant: {
      std::vector<double> base(frame_size);
      rng.fill_normal(base);
      for (std::size_t t = 0; t < spec.t; ++t) {
        auto frame = seq.frame(t);
        for (std::size_t i = 0; i < frame_size; ++i) {
          frame[i] = base[i] + (spec.sigma > 0.0 ? spec.sigma * rng.normal() : 0.0);
        }
      }
      break;
    }
    case Regime::kDiverse:
      rng.fill_normal(seq.frames().values());
      break;
    case Regime::kDrifting: {
      std::vector<double> a(frame_size), b(frame_size);
      rng.fill_normal(a);
      rng.fill_normal(b);
      for (std::size_t t = 0; t < spec.t; ++t) {
        const double alpha =
            spec.t > 1 ? static_cast<double>(t) / static_cast<double>(spec.t - 1) : 0.0;
        auto frame = seq.frame(t);
        for (std::size_t i = 0; i < frame_size; ++i) {
          frame[i] = (1.0 - alpha) * a[i] + alpha * b[i];
        }
      }
      break;
    }
  }
  return seq;
}

}  // namespace sgs
