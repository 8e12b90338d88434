#include "sgs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgs/finite_diff.hpp"
#include "sgs/rng.hpp"

namespace sgs {

namespace {

constexpr int kMaxResampleTries = 200;
constexpr double kReluMargin = 1e-3;

double kink_distance(double v, double gamma) {
  const double q = v / gamma;
  return std::fabs(q - std::round(q)) * gamma;
}

bool kink_safe(const std::vector<double>& delta, const BinGeometry& geom) {
  for (double d : delta) {
    if (kink_distance(d, geom.gamma) < kKinkExclusion * geom.gamma) return false;
  }
  return true;
}

bool relu_safe(const EmbedCache& cache) {
  for (double v : cache.preact.values()) {
    if (std::fabs(v) < kReluMargin) return false;
  }
  return true;
}

FeatureSequence draw_seq(const GradCase& c, std::uint64_t salt) {
  FeatureSequence seq(c.t, c.c, c.h, c.w);
  SeededRng rng(SeededRng::derive(c.seed, salt));
  rng.fill_normal(seq.frames().values());
  return seq;
}

Tensor draw_like(const Tensor& shape_of, std::uint64_t seed, std::uint64_t salt) {
  Tensor out(shape_of.shape());
  SeededRng rng(SeededRng::derive(seed, salt));
  rng.fill_normal(out.values());
  return out;
}

[[noreturn]] void resample_exhausted(const GradCase& c) {
  throw NumericError("could not draw a kink-safe configuration for case '" + c.name + "'");
}

// Per-tensor finite-difference comparison; returns the max over all compared
// tensors of gradient_rel_err.
struct ErrAccum {
  double max_err = 0.0;
  void add(const Tensor& analytic, const Tensor& fd) {
    max_err = std::max(max_err, gradient_rel_err(analytic, fd));
  }
};

double run_embed_case(const GradCase& c) {
  SeededRng prng(SeededRng::derive(c.seed, 1));
  const SimilarityParams params = SimilarityParams::init(c.c, c.l, prng);

  FeatureSequence seq(c.t, c.c, c.h, c.w);
  bool ok = false;
  for (int attempt = 0; attempt < kMaxResampleTries && !ok; ++attempt) {
    seq = draw_seq(c, 100 + static_cast<std::uint64_t>(attempt));
    EmbedCache probe;
    embed_forward(seq, params, &probe);
    ok = relu_safe(probe);
  }
  if (!ok) resample_exhausted(c);

  // loss = sum z^2
  EmbedCache cache;
  const SimilarityVectors z = embed_forward(seq, params, &cache);
  Tensor z_grad(z.z.shape());
  for (std::size_t i = 0; i < z.z.size(); ++i) z_grad[i] = 2.0 * z.z[i];
  const EmbedGrads grads = embed_backward(z_grad, cache, params);

  Tensor frames_grad(seq.frames().shape());
  const double inv = 1.0 / static_cast<double>(c.h * c.w);
  for (std::size_t t = 0; t < c.t; ++t) {
    for (std::size_t ch = 0; ch < c.c; ++ch) {
      const double g = grads.pooled[t * c.c + ch] * inv;
      double* dst = frames_grad.data() + (t * c.c + ch) * c.h * c.w;
      for (std::size_t i = 0; i < c.h * c.w; ++i) dst[i] = g;
    }
  }

  const auto loss_with = [&](const FeatureSequence& s, const SimilarityParams& p) {
    const SimilarityVectors zz = embed_forward(s, p);
    return dot(zz.z.values(), zz.z.values());
  };

  ErrAccum err;
  err.add(frames_grad, finite_diff(
                           [&](const Tensor& frames) {
                             return loss_with(FeatureSequence(frames), params);
                           },
                           seq.frames()));

  const auto param_fd = [&](Tensor SimilarityParams::* field, const Tensor& at) {
    return finite_diff(
        [&](const Tensor& v) {
          SimilarityParams p = params;
          p.*field = v;
          return loss_with(seq, p);
        },
        at);
  };
  err.add(grads.params.w1, param_fd(&SimilarityParams::w1, params.w1));
  err.add(grads.params.b1, param_fd(&SimilarityParams::b1, params.b1));
  err.add(grads.params.w2, param_fd(&SimilarityParams::w2, params.w2));
  err.add(grads.params.b2, param_fd(&SimilarityParams::b2, params.b2));
  return err.max_err;
}

double run_sampler_case(const GradCase& c, KernelKind kernel) {
  SeededRng rng(SeededRng::derive(c.seed, 2));
  const double extent = rng.uniform(0.5, 2.0);
  MagnitudeTrack seed_track;
  seed_track.delta = {extent};
  const BinGeometry geom = make_geometry(seed_track, c.b, c.mode);
  const double support_end = 2.0 * static_cast<double>(c.b) * geom.gamma;

  MagnitudeTrack delta;
  delta.delta.resize(c.t);
  for (std::size_t t = 0; t < c.t; ++t) {
    double v = 0.0;
    int attempt = 0;
    do {
      if (++attempt > kMaxResampleTries) resample_exhausted(c);
      v = rng.uniform(0.0, support_end);
    } while (kink_distance(v, geom.gamma) < kKinkExclusion * geom.gamma);
    delta.delta[t] = v;
  }

  const FeatureSequence seq = draw_seq(c, 3);
  const SampledSequence sampled = sample_forward(seq, delta, geom, kernel);
  const Tensor upstream = draw_like(sampled.outputs, c.seed, 4);
  const SampleGrads grads = sample_backward(upstream, sampled, seq, delta, geom, kernel);

  const auto loss_frames = [&](const Tensor& frames) {
    const SampledSequence s = sample_forward(FeatureSequence(frames), delta, geom, kernel);
    return dot(upstream.values(), s.outputs.values());
  };
  const auto loss_delta = [&](const Tensor& d) {
    MagnitudeTrack track;
    track.delta.assign(d.values().begin(), d.values().end());
    const SampledSequence s = sample_forward(seq, track, geom, kernel);
    return dot(upstream.values(), s.outputs.values());
  };

  // The delta probe must stay strictly inside the kink-free neighborhood.
  const double eps_delta =
      std::min(1e-6, 0.25 * kKinkExclusion * geom.gamma / std::max(1.0, support_end));

  ErrAccum err;
  err.add(grads.frames, finite_diff(loss_frames, seq.frames()));
  err.add(Tensor({c.t}, grads.delta),
          finite_diff(loss_delta, Tensor({c.t}, delta.delta), eps_delta));
  return err.max_err;
}

double run_full_case(const GradCase& c) {
  SeededRng prng(SeededRng::derive(c.seed, 5));
  const SimilarityParams params = SimilarityParams::init(c.c, c.l, prng);

  SgsConfig config;
  config.bins = c.b;
  config.mode = c.mode;
  config.kernel = c.kernel;
  config.measure = Measure::kMagnitude;

  // The frozen geometry spans a slightly inflated extent, so no data point
  // sits at the support boundary by construction; 65/64 keeps 2B/(65/64) off
  // the integer grid for every B <= 32.
  FeatureSequence seq(c.t, c.c, c.h, c.w);
  BinGeometry frozen;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxResampleTries && !ok; ++attempt) {
    seq = draw_seq(c, 300 + static_cast<std::uint64_t>(attempt));
    EmbedCache probe_cache;
    const SimilarityVectors z = embed_forward(seq, params, &probe_cache);
    if (!relu_safe(probe_cache)) continue;
    const MagnitudeTrack delta = magnitudes(z);
    const double dmax = *std::max_element(delta.delta.begin(), delta.delta.end());
    if (dmax <= 1e-6) continue;
    MagnitudeTrack seed_track;
    seed_track.delta = {dmax * (65.0 / 64.0)};
    frozen = make_geometry(seed_track, c.b, c.mode);
    ok = kink_safe(delta.delta, frozen);
  }
  if (!ok) resample_exhausted(c);

  const SgsResult res = sgs_apply(seq, params, config, &frozen);
  const Tensor upstream = draw_like(res.sampled.outputs, c.seed, 6);
  const SgsGrads grads = sgs_backward(upstream, res.cache);

  const auto loss_with = [&](const FeatureSequence& s, const SimilarityParams& p) {
    const SgsResult r = sgs_apply(s, p, config, &frozen);
    return dot(upstream.values(), r.sampled.outputs.values());
  };

  // Probes shift every delta coordinate through the embedding, so keep them an
  // order of magnitude below the kink exclusion radius.
  constexpr double kEps = 1e-7;

  ErrAccum err;
  err.add(grads.frames, finite_diff(
                            [&](const Tensor& frames) {
                              return loss_with(FeatureSequence(frames), params);
                            },
                            seq.frames(), kEps));

  const auto param_fd = [&](Tensor SimilarityParams::* field, const Tensor& at) {
    return finite_diff(
        [&](const Tensor& v) {
          SimilarityParams p = params;
          p.*field = v;
          return loss_with(seq, p);
        },
        at, kEps);
  };
  err.add(grads.params.w1, param_fd(&SimilarityParams::w1, params.w1));
  err.add(grads.params.b1, param_fd(&SimilarityParams::b1, params.b1));
  err.add(grads.params.w2, param_fd(&SimilarityParams::w2, params.w2));
  err.add(grads.params.b2, param_fd(&SimilarityParams::b2, params.b2));
  return err.max_err;
}

}  // namespace

double gradient_rel_err(const Tensor& analytic, const Tensor& fd) {
  if (!analytic.same_shape(fd)) throw ShapeError("gradient shapes do not match");
  double max_diff = 0.0;
  double max_fd = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(analytic[i] - fd[i]));
    max_fd = std::max(max_fd, std::fabs(fd[i]));
  }
  return max_diff / std::max(1.0, max_fd);
}

GradCaseResult run_grad_case(const GradCase& c, double tol) {
  double err = 0.0;
  switch (c.target) {
    case GradCase::Target::kEmbed:
      err = run_embed_case(c);
      break;
    case GradCase::Target::kSamplerFrozen:
      err = run_sampler_case(c, c.kernel);
      break;
    case GradCase::Target::kFullFrozen:
      err = run_full_case(c);
      break;
    case GradCase::Target::kKroneckerDelta:
      err = run_sampler_case(c, KernelKind::kKronecker);
      break;
  }
  return {c.name, err, err <= tol};
}

GradSuiteResult run_grad_suite(const std::vector<GradCase>& cases, double tol) {
  GradSuiteResult result;
  result.all_pass = true;
  for (const GradCase& c : cases) {
    result.cases.push_back(run_grad_case(c, tol));
    if (!result.cases.back().pass) result.all_pass = false;
  }
  return result;
}

std::vector<GradCase> default_gradcheck_cases(std::uint64_t seed) {
  std::vector<GradCase> cases;

  // 20 cases straight through the full operator with the linear kernel; both
  // geometry modes at each size.
  struct Dims {
    std::size_t t, c, l, b, h, w;
  };
  constexpr Dims kFullDims[] = {
      {4, 4, 4, 4, 2, 2},    {6, 4, 2, 3, 2, 2},   {8, 8, 4, 8, 2, 2},
      {8, 4, 8, 2, 2, 3},    {12, 6, 3, 6, 3, 2},  {16, 8, 4, 16, 2, 2},
      {16, 16, 8, 8, 2, 2},  {24, 8, 6, 12, 2, 2}, {32, 8, 4, 32, 2, 2},
      {32, 16, 8, 16, 3, 3},
  };
  std::uint64_t salt = 10;
  for (const Dims& d : kFullDims) {
    for (BinMode mode : {BinMode::kStrict, BinMode::kCentered}) {
      GradCase c;
      std::ostringstream name;
      name << "full-linear-" << bin_mode_name(mode) << "-t" << d.t << "-c" << d.c << "-l" << d.l
           << "-b" << d.b;
      c.name = name.str();
      c.target = GradCase::Target::kFullFrozen;
      c.t = d.t;
      c.c = d.c;
      c.l = d.l;
      c.b = d.b;
      c.h = d.h;
      c.w = d.w;
      c.kernel = KernelKind::kLinear;
      c.mode = mode;
      c.seed = SeededRng::derive(seed, salt++);
      cases.push_back(c);
    }
  }

  const auto extra = [&](const char* name, GradCase::Target target, Dims d, BinMode mode) {
    GradCase c;
    c.name = name;
    c.target = target;
    c.t = d.t;
    c.c = d.c;
    c.l = d.l;
    c.b = d.b;
    c.h = d.h;
    c.w = d.w;
    c.kernel = KernelKind::kLinear;
    c.mode = mode;
    c.seed = SeededRng::derive(seed, salt++);
    cases.push_back(c);
  };
  extra("embed-small", GradCase::Target::kEmbed, {4, 4, 4, 4, 2, 2}, BinMode::kStrict);
  extra("embed-wide", GradCase::Target::kEmbed, {8, 16, 8, 4, 2, 2}, BinMode::kStrict);
  extra("sampler-strict", GradCase::Target::kSamplerFrozen, {12, 3, 2, 6, 2, 2},
        BinMode::kStrict);
  extra("sampler-centered", GradCase::Target::kSamplerFrozen, {12, 3, 2, 6, 2, 2},
        BinMode::kCentered);
  extra("kronecker-delta-strict", GradCase::Target::kKroneckerDelta, {10, 3, 2, 5, 2, 2},
        BinMode::kStrict);
  extra("kronecker-delta-centered", GradCase::Target::kKroneckerDelta, {10, 3, 2, 5, 2, 2},
        BinMode::kCentered);
  return cases;
}

std::vector<GradCase> load_gradcheck_cases(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cases file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cases file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("cases file must hold a JSON array");

  std::vector<GradCase> cases;
  std::size_t index = 0;
  for (const auto& item : doc) {
    if (!item.is_object()) throw ConfigError("each case must be a JSON object");
    GradCase c;
    c.seed = SeededRng::derive(seed, 1000 + index);
    std::ostringstream default_name;
    default_name << "case-" << index;
    c.name = default_name.str();

    for (const auto& [key, value] : item.items()) {
      try {
        if (key == "name") {
          c.name = value.get<std::string>();
        } else if (key == "target") {
          const std::string t = value.get<std::string>();
          if (t == "embed") {
            c.target = GradCase::Target::kEmbed;
          } else if (t == "sampler-frozen") {
            c.target = GradCase::Target::kSamplerFrozen;
          } else if (t == "full-frozen") {
            c.target = GradCase::Target::kFullFrozen;
          } else if (t == "kronecker-delta") {
            c.target = GradCase::Target::kKroneckerDelta;
          } else {
            throw ConfigError("unknown target '" + t + "'");
          }
        } else if (key == "t") {
          c.t = value.get<std::size_t>();
        } else if (key == "c") {
          c.c = value.get<std::size_t>();
        } else if (key == "l") {
          c.l = value.get<std::size_t>();
        } else if (key == "b") {
          c.b = value.get<std::size_t>();
        } else if (key == "h") {
          c.h = value.get<std::size_t>();
        } else if (key == "w") {
          c.w = value.get<std::size_t>();
        } else if (key == "kernel") {
          c.kernel = parse_kernel(value.get<std::string>());
        } else if (key == "mode") {
          c.mode = parse_bin_mode(value.get<std::string>());
        } else if (key == "seed") {
          c.seed = value.get<std::uint64_t>();
        } else {
          throw ConfigError("unknown case field '" + key + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("case field '" + key + "': " + e.what());
      }
    }
    if (c.t == 0 || c.c == 0 || c.l == 0 || c.b == 0 || c.h == 0 || c.w == 0) {
      throw ConfigError("case '" + c.name + "' has a zero dimension");
    }
    cases.push_back(std::move(c));
    ++index;
  }
  if (cases.empty()) throw ConfigError("cases file holds no cases");
  return cases;
}

}  // namespace sgs
