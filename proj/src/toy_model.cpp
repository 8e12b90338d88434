#include "sgs/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sgs/io.hpp"
#include "sgs/synthetic.hpp"

namespace sgs {

namespace {

// Class k draws clips from regime cycle position k.
constexpr Regime kClassRegime[] = {Regime::kRedundant, Regime::kDiverse, Regime::kDrifting};

struct Example {
  FeatureSequence seq;
  std::size_t label;
};

// Keeps the process single-threaded for the duration of a training run so the
// update order is strictly sequential.
class SingleThreadScope {
 public:
  SingleThreadScope() {
#ifdef _OPENMP
    saved_ = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
  }
  ~SingleThreadScope() {
#ifdef _OPENMP
    omp_set_num_threads(saved_);
#endif
  }
  SingleThreadScope(const SingleThreadScope&) = delete;
  SingleThreadScope& operator=(const SingleThreadScope&) = delete;

 private:
  int saved_ = 1;
};

struct ClipEval {
  double loss = 0.0;
  bool correct = false;
  std::size_t bprime = 0;
};

struct Workspace {
  const ToyModelConfig* config = nullptr;
  std::size_t feat = 0;  // C*H*W

  // Forward pieces of the most recent clip, reused by the backward pass.
  std::optional<SgsResult> sgs;
  std::vector<double> mean_feat;
  std::vector<double> probs;

  ClipEval forward(const Example& ex, const SimilarityParams& params, const Tensor& head_w,
                   const Tensor& head_b) {
    sgs = sgs_apply(ex.seq, params, config->sgs);
    const std::size_t bprime = sgs->sampled.bin_prime();
    const double* out = sgs->sampled.outputs.data();

    mean_feat.assign(feat, 0.0);
    for (std::size_t b = 0; b < bprime; ++b) {
      for (std::size_t j = 0; j < feat; ++j) mean_feat[j] += out[b * feat + j];
    }
    const double inv_b = 1.0 / static_cast<double>(bprime);
    for (double& v : mean_feat) v *= inv_b;

    const std::size_t classes = config->classes;
    probs.assign(classes, 0.0);
    double max_logit = -1e300;
    for (std::size_t k = 0; k < classes; ++k) {
      double logit = head_b[k];
      const double* row = head_w.data() + k * feat;
      for (std::size_t j = 0; j < feat; ++j) logit += row[j] * mean_feat[j];
      probs[k] = logit;
      max_logit = std::max(max_logit, logit);
    }
    double norm = 0.0;
    for (double& p : probs) {
      p = std::exp(p - max_logit);
      norm += p;
    }
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      probs[k] /= norm;
      if (probs[k] > probs[argmax]) argmax = k;
    }
    return {-std::log(std::max(probs[ex.label], 1e-300)), argmax == ex.label, bprime};
  }

  // Accumulates gradients of the per-clip loss; forward() must have seen the
  // same clip immediately before.
  void backward(const Example& ex, const Tensor& head_w, SimilarityParams& g_params,
                Tensor& g_head_w, Tensor& g_head_b) {
    const std::size_t classes = config->classes;
    const std::size_t bprime = sgs->sampled.bin_prime();

    std::vector<double> d_mean(feat, 0.0);
    for (std::size_t k = 0; k < classes; ++k) {
      const double d_logit = probs[k] - (k == ex.label ? 1.0 : 0.0);
      g_head_b[k] += d_logit;
      double* gw = g_head_w.data() + k * feat;
      const double* row = head_w.data() + k * feat;
      for (std::size_t j = 0; j < feat; ++j) {
        gw[j] += d_logit * mean_feat[j];
        d_mean[j] += d_logit * row[j];
      }
    }

    Tensor out_grad(sgs->sampled.outputs.shape());
    const double inv_b = 1.0 / static_cast<double>(bprime);
    for (std::size_t b = 0; b < bprime; ++b) {
      for (std::size_t j = 0; j < feat; ++j) out_grad[b * feat + j] = d_mean[j] * inv_b;
    }

    const SgsGrads g = sgs_backward(out_grad, sgs->cache);
    g_params.w1 += g.params.w1;
    g_params.b1 += g.params.b1;
    g_params.w2 += g.params.w2;
    g_params.b2 += g.params.b2;
  }
};

void axpy(Tensor& x, const Tensor& g, double scale) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= scale * g[i];
}

}  // namespace

void ToyModelConfig::validate() const {
  if (t == 0 || c == 0 || h == 0 || w == 0) throw ConfigError("clip dimensions must be positive");
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (sgs.bins == 0) throw ConfigError("bin count must be positive");
  if (classes < 2 || classes > 3) {
    throw ConfigError("class count must be 2 or 3 (one synthetic regime per class)");
  }
  if (clips_per_class == 0) throw ConfigError("clips_per_class must be positive");
  if (sigma_redundant < 0.0) throw ConfigError("sigma_redundant must be non-negative");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (sgs.measure != Measure::kMagnitude) {
    throw ConfigError("training supports the magnitude measure only");
  }
}

TrainReport train_toy(const ToyModelConfig& config) {
  config.validate();
  SingleThreadScope single_thread;

  // Interleaved labels: clip j belongs to class j % classes, so sequential
  // batches stay class-balanced.
  const std::size_t total = config.classes * config.clips_per_class;
  std::vector<Example> dataset;
  dataset.reserve(total);
  for (std::size_t j = 0; j < total; ++j) {
    const std::size_t label = j % config.classes;
    SyntheticSpec spec;
    spec.t = config.t;
    spec.c = config.c;
    spec.h = config.h;
    spec.w = config.w;
    spec.regime = kClassRegime[label];
    spec.sigma = label == 0 ? config.sigma_redundant : 0.0;
    spec.seed = SeededRng::derive(config.seed, j);
    dataset.push_back({gen_clip(spec), label});
  }

  const std::size_t feat = config.c * config.h * config.w;
  SeededRng rng(config.seed);
  SimilarityParams params = SimilarityParams::init(config.c, config.embed_dim, rng);
  Tensor head_w({config.classes, feat});
  Tensor head_b({config.classes});
  const double a = std::sqrt(6.0 / static_cast<double>(feat + config.classes));
  rng.fill_uniform(head_w.values(), -a, a);

  TrainReport report;
  report.initial_embed = params;

  Workspace ws;
  ws.config = &config;
  ws.feat = feat;

  SimilarityParams g_params;
  Tensor g_head_w(head_w.shape());
  Tensor g_head_b(head_b.shape());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t start = 0; start < total; start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, total);
      g_params.w1 = Tensor(params.w1.shape());
      g_params.b1 = Tensor(params.b1.shape());
      g_params.w2 = Tensor(params.w2.shape());
      g_params.b2 = Tensor(params.b2.shape());
      g_head_w = Tensor(head_w.shape());
      g_head_b = Tensor(head_b.shape());

      for (std::size_t j = start; j < end; ++j) {
        ws.forward(dataset[j], params, head_w, head_b);
        ws.backward(dataset[j], head_w, g_params, g_head_w, g_head_b);
      }

      const double scale = config.learning_rate / static_cast<double>(end - start);
      axpy(params.w1, g_params.w1, scale);
      axpy(params.b1, g_params.b1, scale);
      axpy(params.w2, g_params.w2, scale);
      axpy(params.b2, g_params.b2, scale);
      axpy(head_w, g_head_w, scale);
      axpy(head_b, g_head_b, scale);
    }

    // Post-update evaluation over the full dataset.
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<double> bprime_sum(config.classes, 0.0);
    for (const Example& ex : dataset) {
      const ClipEval eval = ws.forward(ex, params, head_w, head_b);
      loss_sum += eval.loss;
      correct += eval.correct ? 1 : 0;
      bprime_sum[ex.label] += static_cast<double>(eval.bprime);
    }
    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(total);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    report.curve.push_back(stats);
    if (!std::isfinite(stats.loss)) {
      std::ostringstream msg;
      msg << "training loss diverged at epoch " << epoch;
      throw NumericError(msg.str());
    }
    if (epoch == config.epochs) {
      report.mean_bprime_per_class.resize(config.classes);
      for (std::size_t k = 0; k < config.classes; ++k) {
        report.mean_bprime_per_class[k] =
            bprime_sum[k] / static_cast<double>(config.clips_per_class);
      }
    }
  }

  report.final_accuracy = report.curve.back().accuracy;
  report.embed_params = std::move(params);
  report.head_weight = std::move(head_w);
  report.head_bias = std::move(head_b);
  return report;
}

ToyModelConfig load_toy_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");

  ToyModelConfig cfg;
  cfg.sgs.bins = 4;
  cfg.sgs.mode = BinMode::kCentered;
  cfg.sgs.kernel = KernelKind::kLinear;
  cfg.sgs.measure = Measure::kMagnitude;

  bool seed_given = false;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "t") {
        cfg.t = value.get<std::size_t>();
      } else if (key == "c") {
        cfg.c = value.get<std::size_t>();
      } else if (key == "h") {
        cfg.h = value.get<std::size_t>();
      } else if (key == "w") {
        cfg.w = value.get<std::size_t>();
      } else if (key == "embed_dim") {
        cfg.embed_dim = value.get<std::size_t>();
      } else if (key == "bins") {
        cfg.sgs.bins = value.get<std::size_t>();
      } else if (key == "kernel") {
        cfg.sgs.kernel = parse_kernel(value.get<std::string>());
      } else if (key == "mode") {
        cfg.sgs.mode = parse_bin_mode(value.get<std::string>());
      } else if (key == "measure") {
        cfg.sgs.measure = parse_measure(value.get<std::string>());
      } else if (key == "normalize") {
        cfg.sgs.normalize = value.get<bool>();
      } else if (key == "classes") {
        cfg.classes = value.get<std::size_t>();
      } else if (key == "clips_per_class") {
        cfg.clips_per_class = value.get<std::size_t>();
      } else if (key == "sigma_redundant") {
        cfg.sigma_redundant = value.get<double>();
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "epochs") {
        cfg.epochs = value.get<std::size_t>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<std::size_t>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
        seed_given = true;
      } else {
        throw ConfigError("unknown config field '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config field '" + key + "': " + e.what());
    }
  }
  if (!seed_given) {
    if (const char* env = std::getenv("SGS_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError("SGS_SEED must be an unsigned integer");
      }
    }
  }
  cfg.validate();
  return cfg;
}

void write_train_reports(const TrainReport& report, const ToyModelConfig& config,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  std::ostringstream curve;
  curve << "epoch,loss,accuracy\n";
  for (std::size_t i = 0; i < report.curve.size(); ++i) {
    curve << (i + 1) << ',' << format_double(report.curve[i].loss) << ','
          << format_double(report.curve[i].accuracy) << '\n';
  }
  write_text_file((dir / "loss_curve.csv").string(), curve.str());

  nlohmann::json doc;
  doc["config"] = {
      {"t", config.t},
      {"c", config.c},
      {"h", config.h},
      {"w", config.w},
      {"embed_dim", config.embed_dim},
      {"bins", config.sgs.bins},
      {"kernel", kernel_name(config.sgs.kernel)},
      {"mode", bin_mode_name(config.sgs.mode)},
      {"measure", measure_name(config.sgs.measure)},
      {"classes", config.classes},
      {"clips_per_class", config.clips_per_class},
      {"sigma_redundant", config.sigma_redundant},
      {"learning_rate", config.learning_rate},
      {"epochs", config.epochs},
      {"batch_size", config.batch_size},
      {"seed", config.seed},
  };
  doc["final_accuracy"] = report.final_accuracy;
  doc["final_loss"] = report.curve.back().loss;
  doc["mean_bprime_per_class"] = report.mean_bprime_per_class;
  doc["embed_params_changed"] = !same_values(report.embed_params, report.initial_embed);
  write_text_file((dir / "report.json").string(), doc.dump(2) + "\n");
}

}  // namespace sgs
