#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgs/sampler.hpp"

namespace sgs {

// Desk-scale classifier: sampling operator -> temporal mean over the
// surviving bins -> one affine layer -> softmax. Trained with plain SGD on a
// two-regime synthetic task (class 0: redundant, class 1: diverse).
struct ToyModelConfig {
  std::size_t t = 8, c = 4, h = 4, w = 4;
  std::size_t embed_dim = 4;
  SgsConfig sgs;
  std::size_t classes = 2;
  std::size_t clips_per_class = 12;
  double sigma_redundant = 0.0;
  double learning_rate = 0.2;
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;

  void validate() const;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> curve;
  double final_accuracy = 0.0;
  std::vector<double> mean_bprime_per_class;
  SimilarityParams embed_params;   // final embedding parameters
  SimilarityParams initial_embed;  // as initialized, before any update
  Tensor head_weight;              // classes x (C*H*W)
  Tensor head_bias;                // classes
};

// Deterministic in config.seed: fixed clip order, sequential batches, no
// shuffling, single-threaded. Throws NumericError naming the epoch if the
// loss becomes non-finite.
TrainReport train_toy(const ToyModelConfig& config);

// JSON config file; missing fields keep their defaults. A missing "seed"
// falls back to the SGS_SEED environment variable, then 42.
ToyModelConfig load_toy_config(const std::string& path);

// Writes loss_curve.csv and report.json under out_dir.
void write_train_reports(const TrainReport& report, const ToyModelConfig& config,
                         const std::string& out_dir);

}  // namespace sgs
