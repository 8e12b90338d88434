#include "sgs/demo.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "sgs/io.hpp"

namespace sgs {

CorpusRegime parse_corpus_regime(const std::string& name) {
  if (name == "mixed") return {true, Regime::kDiverse};
  return {false, parse_regime(name)};
}

std::string corpus_regime_name(const CorpusRegime& r) {
  return r.mixed ? "mixed" : regime_name(r.regime);
}

std::size_t HistogramReport::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

DemoResult run_demo(const DemoConfig& config) {
  if (config.clips == 0) throw ConfigError("corpus must contain at least one clip");

  SeededRng param_rng(config.seed);
  const SimilarityParams params = SimilarityParams::init(config.c, config.embed_dim, param_rng);

  static constexpr Regime kMixedCycle[] = {Regime::kRedundant, Regime::kDiverse,
                                           Regime::kDrifting};
  DemoResult result;
  result.config = config;
  result.clips.reserve(config.clips);

  std::size_t max_bprime = 0;
  double sum_bprime = 0.0;
  for (std::size_t i = 0; i < config.clips; ++i) {
    SyntheticSpec spec;
    spec.t = config.t;
    spec.c = config.c;
    spec.h = config.h;
    spec.w = config.w;
    spec.regime = config.regime.mixed ? kMixedCycle[i % 3] : config.regime.regime;
    spec.sigma = spec.regime == Regime::kRedundant ? config.sigma : 0.0;
    spec.seed = SeededRng::derive(config.seed, i);

    const SgsResult out = sgs_apply(gen_clip(spec), params, config.sgs);
    const std::size_t bprime = out.sampled.bin_prime();
    result.clips.push_back({i, spec.regime, bprime});
    max_bprime = std::max(max_bprime, bprime);
    sum_bprime += static_cast<double>(bprime);
  }

  result.histogram.counts.assign(max_bprime, 0);
  for (const ClipOutcome& clip : result.clips) ++result.histogram.counts[clip.bprime - 1];
  result.mean_bprime = sum_bprime / static_cast<double>(config.clips);
  return result;
}

void write_demo_reports(const DemoResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  std::ostringstream hist;
  hist << "bprime,count\n";
  for (std::size_t i = 0; i < result.histogram.counts.size(); ++i) {
    hist << (i + 1) << ',' << result.histogram.counts[i] << '\n';
  }
  write_text_file((dir / "histogram.csv").string(), hist.str());

  std::ostringstream clips;
  clips << "clip,regime,bprime\n";
  for (const ClipOutcome& clip : result.clips) {
    clips << clip.clip << ',' << regime_name(clip.regime) << ',' << clip.bprime << '\n';
  }
  write_text_file((dir / "clips.csv").string(), clips.str());

  nlohmann::json doc;
  const DemoConfig& c = result.config;
  doc["config"] = {
      {"regime", corpus_regime_name(c.regime)},
      {"clips", c.clips},
      {"t", c.t},
      {"c", c.c},
      {"h", c.h},
      {"w", c.w},
      {"embed_dim", c.embed_dim},
      {"sigma", c.sigma},
      {"seed", c.seed},
      {"bins", c.sgs.bins},
      {"bins_per_coord", c.sgs.bins_per_coord},
      {"mode", bin_mode_name(c.sgs.mode)},
      {"kernel", kernel_name(c.sgs.kernel)},
      {"measure", measure_name(c.sgs.measure)},
      {"normalize", c.sgs.normalize},
  };
  doc["mean_bprime"] = result.mean_bprime;
  doc["histogram"] = result.histogram.counts;
  write_text_file((dir / "report.json").string(), doc.dump(2) + "\n");
}

}  // namespace sgs
