#include "sgs/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace sgs {

KernelKind parse_kernel(const std::string& name) {
  if (name == "linear") return KernelKind::kLinear;
  if (name == "kronecker") return KernelKind::kKronecker;
  throw ConfigError("unknown kernel '" + name + "'");
}

std::string kernel_name(KernelKind k) {
  return k == KernelKind::kLinear ? "linear" : "kronecker";
}

double kernel_weight(KernelKind kind, double delta_t, double beta_b, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("kernel width must be positive");
  const double dist = std::fabs(delta_t - beta_b);
  if (kind == KernelKind::kLinear) return std::max(0.0, 1.0 - dist / gamma);
  return std::floor(dist / gamma) == 0.0 ? 1.0 : 0.0;
}

namespace {

struct Support {
  bool found = false;
  std::size_t bin = 0;
  double weight = 0.0;
};

// Bin supports are the disjoint open intervals (2b*gamma, (2b+2)*gamma), so a
// coordinate has positive weight in at most one bin and floor(v / (2*gamma))
// names it. The neighbors are probed too in case the division rounded across
// an edge.
Support find_support(double v, const BinGeometry& geom, KernelKind kind) {
  const double q = v / (2.0 * geom.gamma);
  std::size_t guess = 0;
  if (q >= static_cast<double>(geom.bin_count)) {
    guess = geom.bin_count - 1;
  } else if (q > 0.0) {
    guess = static_cast<std::size_t>(q);
  }
  const std::size_t lo = guess > 0 ? guess - 1 : 0;
  const std::size_t hi = std::min(guess + 1, geom.bin_count - 1);
  for (std::size_t b = lo; b <= hi; ++b) {
    const double w = kernel_weight(kind, v, geom.centers[b], geom.gamma);
    if (w > 0.0) return {true, b, w};
  }
  return {};
}

SampledSequence pooled_average(const FeatureSequence& seq) {
  const std::size_t t_len = seq.t();
  const std::size_t frame_size = seq.frame_size();
  SampledSequence out;
  out.outputs = Tensor({1, seq.c(), seq.h(), seq.w()});
  out.surviving_bins = {0};
  out.assignment.pooled_fallback = true;
  out.assignment.bin_counts = {t_len};
  const double inv = 1.0 / static_cast<double>(t_len);
  out.assignment.entries.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) out.assignment.entries.push_back({t, 0, inv});

  double* dst = out.outputs.data();
  const double* src = seq.frames().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(frame_size); ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) acc += src[t * frame_size + i];
    dst[i] = acc * inv;
  }
  return out;
}

// Groups the entries by bin, drops empty bins and aggregates. Entries must be
// in ascending frame order with positive weights; per-bin accumulation runs in
// that order so the result does not depend on the thread count.
SampledSequence aggregate(const FeatureSequence& seq, std::vector<WeightEntry> entries,
                          KernelKind kind, const SampleOptions& opts) {
  if (entries.empty()) return pooled_average(seq);

  std::vector<std::size_t> surviving;
  surviving.reserve(entries.size());
  for (const WeightEntry& e : entries) surviving.push_back(e.bin);
  std::sort(surviving.begin(), surviving.end());
  surviving.erase(std::unique(surviving.begin(), surviving.end()), surviving.end());

  const std::size_t bprime = surviving.size();
  std::vector<std::vector<std::size_t>> members(bprime);  // entry indices per slot
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::size_t slot = static_cast<std::size_t>(
        std::lower_bound(surviving.begin(), surviving.end(), entries[i].bin) - surviving.begin());
    members[slot].push_back(i);
  }

  SampledSequence out;
  out.outputs = Tensor({bprime, seq.c(), seq.h(), seq.w()});
  out.surviving_bins = std::move(surviving);
  out.assignment.bin_counts.resize(bprime);
  const bool normalize = opts.normalize && kind == KernelKind::kLinear;
  out.assignment.normalized = normalize;

  const std::size_t frame_size = seq.frame_size();
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(bprime); ++s) {
    const std::size_t slot = static_cast<std::size_t>(s);
    double* dst = out.outputs.data() + slot * frame_size;
    double weight_sum = 0.0;
    for (std::size_t i : members[slot]) {
      const WeightEntry& e = entries[i];
      const double* src = seq.frame(e.frame).data();
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] += e.weight * src[j];
      weight_sum += e.weight;
    }
    out.assignment.bin_counts[slot] = members[slot].size();
    double scale = 1.0;
    if (kind == KernelKind::kKronecker) {
      scale = 1.0 / static_cast<double>(members[slot].size());
    } else if (normalize) {
      scale = 1.0 / weight_sum;
    }
    if (scale != 1.0) {
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] *= scale;
    }
  }

  // The stored weights are the effective per-frame coefficients: for the
  // kronecker kernel each member contributes 1/count, so weight * count = 1.
  if (kind == KernelKind::kKronecker) {
    for (std::size_t slot = 0; slot < bprime; ++slot) {
      const double inv = 1.0 / static_cast<double>(members[slot].size());
      for (std::size_t i : members[slot]) entries[i].weight = inv;
    }
  }

  out.assignment.entries = std::move(entries);
  return out;
}

void check_geometry(const BinGeometry& geom) {
  if (geom.bin_count == 0) throw ConfigError("bin count must be positive");
  if (geom.centers.size() != geom.bin_count) {
    throw ConfigError("bin centers do not match the bin count");
  }
  if (!geom.degenerate && !(geom.gamma > 0.0)) {
    throw ConfigError("kernel width must be positive");
  }
}

}  // namespace

SampledSequence sample_forward(const FeatureSequence& seq, const MagnitudeTrack& delta,
                               const BinGeometry& geom, KernelKind kind,
                               const SampleOptions& opts) {
  if (delta.delta.size() != seq.t()) {
    throw ShapeError("coordinate track length does not match the frame count");
  }
  check_geometry(geom);
  if (geom.degenerate) return pooled_average(seq);

  std::vector<WeightEntry> entries;
  entries.reserve(seq.t());
  for (std::size_t t = 0; t < seq.t(); ++t) {
    const Support s = find_support(delta.delta[t], geom, kind);
    if (s.found) entries.push_back({t, s.bin, s.weight});
  }
  return aggregate(seq, std::move(entries), kind, opts);
}

SampledSequence sample_forward_multidim(const FeatureSequence& seq, const Tensor& coords,
                                        const MultiDimGeometry& geom, KernelKind kind,
                                        const SampleOptions& opts) {
  if (coords.rank() != 2 || coords.dim(0) != seq.t()) {
    throw ShapeError("coordinates must be T x K with T matching the frame count");
  }
  const std::size_t k_len = coords.dim(1);
  if (geom.coord_count() != k_len) {
    throw ConfigError("geometry coordinate count does not match the coordinates");
  }
  bool all_degenerate = true;
  for (const BinGeometry& g : geom.per_coord) {
    check_geometry(g);
    if (!g.degenerate) all_degenerate = false;
  }
  if (all_degenerate) return pooled_average(seq);

  // Row-major flattening over the effective axes; degenerate axes collapse to
  // size 1 and contribute weight 1.
  std::vector<std::size_t> stride(k_len, 1);
  for (std::size_t k = k_len - 1; k-- > 0;) {
    const BinGeometry& g = geom.per_coord[k + 1];
    stride[k] = stride[k + 1] * (g.degenerate ? 1 : g.bin_count);
  }

  std::vector<WeightEntry> entries;
  entries.reserve(seq.t());
  for (std::size_t t = 0; t < seq.t(); ++t) {
    double weight = 1.0;
    std::size_t flat = 0;
    bool inside = true;
    for (std::size_t k = 0; k < k_len && inside; ++k) {
      const BinGeometry& g = geom.per_coord[k];
      if (g.degenerate) continue;
      const Support s = find_support(coords[t * k_len + k], g, kind);
      if (s.found) {
        weight *= s.weight;
        flat += s.bin * stride[k];
      } else {
        inside = false;
      }
    }
    if (inside) entries.push_back({t, flat, weight});
  }
  return aggregate(seq, std::move(entries), kind, opts);
}

SampleGrads sample_backward(const Tensor& out_grad, const SampledSequence& sampled,
                            const FeatureSequence& seq, const MagnitudeTrack& delta,
                            const BinGeometry& geom, KernelKind kind) {
  if (!out_grad.same_shape(sampled.outputs)) {
    throw ShapeError("upstream gradient shape does not match the sampled outputs");
  }
  if (delta.delta.size() != seq.t()) {
    throw ShapeError("coordinate track length does not match the frame count");
  }
  if (sampled.assignment.normalized) {
    throw ConfigError("backward pass does not support normalized outputs");
  }
  const std::size_t frame_size = seq.frame_size();

  SampleGrads g;
  g.frames = Tensor(seq.frames().shape());
  g.delta.assign(seq.t(), 0.0);

  const auto& entries = sampled.assignment.entries;
  const auto& surviving = sampled.surviving_bins;
  const bool delta_active = kind == KernelKind::kLinear && !sampled.assignment.pooled_fallback;

  // Every frame appears in at most one entry, so the writes are disjoint.
  // Entry weights are the effective coefficients for every kernel, so
  // d(out)/d(frame) is just the stored weight.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(entries.size()); ++i) {
    const WeightEntry& e = entries[static_cast<std::size_t>(i)];
    const std::size_t slot = static_cast<std::size_t>(
        std::lower_bound(surviving.begin(), surviving.end(), e.bin) - surviving.begin());
    const double* up = out_grad.data() + slot * frame_size;
    double* dst = g.frames.data() + e.frame * frame_size;
    for (std::size_t j = 0; j < frame_size; ++j) dst[j] += e.weight * up[j];

    if (delta_active) {
      const double* frame = seq.frame(e.frame).data();
      double inner = 0.0;
      for (std::size_t j = 0; j < frame_size; ++j) inner += up[j] * frame[j];
      // Triangle slope: rising left of the center (inclusive), falling right
      // of it. Entries only exist strictly inside the support.
      const double sign = delta.delta[e.frame] <= geom.centers[e.bin] ? 1.0 : -1.0;
      g.delta[e.frame] = sign / geom.gamma * inner;
    }
  }
  return g;
}

SgsResult sgs_apply(const FeatureSequence& seq, const SimilarityParams& params,
                    const SgsConfig& config, const BinGeometry* frozen_geom) {
  if (config.bins == 0) throw ConfigError("bin count must be positive");
  EmbedCache embed;
  SimilarityVectors z = embed_forward(seq, params, &embed);
  const SampleOptions opts{config.normalize};

  if (config.measure == Measure::kMagnitude) {
    MagnitudeTrack delta = magnitudes(z);
    BinGeometry geom =
        frozen_geom ? *frozen_geom : make_geometry(delta, config.bins, config.mode);
    SampledSequence sampled = sample_forward(seq, delta, geom, config.kernel, opts);
    SgsCache cache{seq,
                   params,
                   std::move(embed),
                   std::move(z),
                   std::move(delta),
                   Tensor{},
                   std::move(geom),
                   MultiDimGeometry{},
                   config,
                   sampled};
    return SgsResult{std::move(sampled), std::move(cache)};
  }

  if (frozen_geom) {
    throw ConfigError("frozen geometry is only supported for the magnitude measure");
  }
  const Tensor sph = to_spherical(z);
  Tensor coords;
  if (config.measure == Measure::kSpherical) {
    coords = sph;
  } else {
    const std::size_t t_len = z.t(), l_len = z.l();
    coords = Tensor({t_len, l_len - 1});
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t k = 1; k < l_len; ++k) coords[t * (l_len - 1) + k - 1] = sph[t * l_len + k];
    }
  }
  const std::vector<CoordKind> kinds = coord_kinds_for(config.measure, z.l());
  std::vector<std::size_t> bins_per_coord = config.bins_per_coord;
  if (bins_per_coord.empty()) {
    bins_per_coord.assign(kinds.size(), config.bins);
  } else if (bins_per_coord.size() != kinds.size()) {
    throw ConfigError("bins_per_coord length does not match the coordinate count");
  }
  MultiDimGeometry geom = make_multidim_geometry(coords, bins_per_coord, kinds, config.mode);
  SampledSequence sampled = sample_forward_multidim(seq, coords, geom, config.kernel, opts);
  SgsCache cache{seq,
                 params,
                 std::move(embed),
                 std::move(z),
                 MagnitudeTrack{},
                 std::move(coords),
                 BinGeometry{},
                 std::move(geom),
                 config,
                 sampled};
  return SgsResult{std::move(sampled), std::move(cache)};
}

SgsGrads sgs_backward(const Tensor& out_grad, const SgsCache& cache) {
  if (cache.config.measure != Measure::kMagnitude) {
    throw ConfigError("backward pass is only supported for the magnitude measure");
  }
  SampleGrads sg = sample_backward(out_grad, cache.sampled, cache.seq, cache.delta, cache.geom,
                                   cache.config.kernel);

  const std::size_t t_len = cache.z.t(), l_len = cache.z.l();
  Tensor z_grad({t_len, l_len});
  for (std::size_t t = 0; t < t_len; ++t) {
    const double norm = cache.delta.delta[t];
    if (!(norm > 0.0) || sg.delta[t] == 0.0) continue;
    const double scale = sg.delta[t] / norm;
    const double* zt = cache.z.z.data() + t * l_len;
    double* row = z_grad.data() + t * l_len;
    for (std::size_t j = 0; j < l_len; ++j) row[j] = scale * zt[j];
  }

  EmbedGrads eg = embed_backward(z_grad, cache.embed, cache.params);

  SgsGrads g;
  g.frames = std::move(sg.frames);
  g.params = std::move(eg.params);
  const std::size_t c_len = cache.seq.c();
  const std::size_t spatial = cache.seq.h() * cache.seq.w();
  const double inv = 1.0 / static_cast<double>(spatial);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ts = 0; ts < static_cast<std::ptrdiff_t>(t_len); ++ts) {
    const std::size_t t = static_cast<std::size_t>(ts);
    double* dst = g.frames.data() + t * c_len * spatial;
    const double* gp = eg.pooled.data() + t * c_len;
    for (std::size_t c = 0; c < c_len; ++c) {
      const double add = gp[c] * inv;
      if (add == 0.0) continue;
      double* plane = dst + c * spatial;
      for (std::size_t i = 0; i < spatial; ++i) plane[i] += add;
    }
  }
  return g;
}

}  // namespace sgs
