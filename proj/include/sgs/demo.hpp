#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgs/sampler.hpp"
#include "sgs/synthetic.hpp"

namespace sgs {

// Corpus regime: a single synthetic regime or a round-robin mix.
struct CorpusRegime {
  bool mixed = false;
  Regime regime = Regime::kDiverse;
};

CorpusRegime parse_corpus_regime(const std::string& name);
std::string corpus_regime_name(const CorpusRegime& r);

struct DemoConfig {
  CorpusRegime regime;
  std::size_t clips = 100;
  std::size_t t = 16, c = 8, h = 8, w = 8;
  std::size_t embed_dim = 4;
  double sigma = 0.01;
  SgsConfig sgs;
  std::uint64_t seed = 42;
};

struct ClipOutcome {
  std::size_t clip = 0;
  Regime regime = Regime::kDiverse;
  std::size_t bprime = 0;
};

// Counts of clips per B' value; counts[i] is the number of clips with
// B' == i + 1 and the entries sum to the corpus size.
struct HistogramReport {
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

struct DemoResult {
  DemoConfig config;
  std::vector<ClipOutcome> clips;
  HistogramReport histogram;
  double mean_bprime = 0.0;
};

// Embedding parameters are drawn once from the seed; each clip then gets an
// independent derived stream, so per-clip evaluation order cannot change the
// result.
DemoResult run_demo(const DemoConfig& config);

// Writes histogram.csv, clips.csv and report.json under out_dir.
// Identical configs produce byte-identical files.
void write_demo_reports(const DemoResult& result, const std::string& out_dir);

}  // namespace sgs
