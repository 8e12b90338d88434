#include "sgs/reference_sampler.hpp"

#include <algorithm>
#include <cmath>

namespace sgs::reference {

namespace {

double weight_of(KernelKind kind, double v, double center, double gamma) {
  const double dist = std::fabs(v - center);
  if (kind == KernelKind::kLinear) return std::max(0.0, 1.0 - dist / gamma);
  return std::floor(dist / gamma) == 0.0 ? 1.0 : 0.0;
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
  for (std::size_t t = 0; t < t_len; ++t) out.assignment.entries.push_back({t, 0, inv});

  double* dst = out.outputs.data();
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* src = seq.frame(t).data();
    for (std::size_t j = 0; j < frame_size; ++j) dst[j] += src[j];
  }
  for (std::size_t j = 0; j < frame_size; ++j) dst[j] *= inv;
  return out;
}

// Evaluates the kernel for every (bin, frame) pair; weight_fn(t, b) returns
// the weight of frame t in original bin b.
template <typename WeightFn>
SampledSequence dense_forward(const FeatureSequence& seq, std::size_t total_bins,
                              const WeightFn& weight_fn, KernelKind kind,
                              const SampleOptions& opts) {
  const std::size_t t_len = seq.t();
  const std::size_t frame_size = seq.frame_size();

  std::vector<std::size_t> surviving;
  for (std::size_t b = 0; b < total_bins; ++b) {
    for (std::size_t t = 0; t < t_len; ++t) {
      if (weight_fn(t, b) > 0.0) {
        surviving.push_back(b);
        break;
      }
    }
  }
  if (surviving.empty()) return pooled_average(seq);

  SampledSequence out;
  out.outputs = Tensor({surviving.size(), seq.c(), seq.h(), seq.w()});
  out.surviving_bins = surviving;
  const bool normalize = opts.normalize && kind == KernelKind::kLinear;
  out.assignment.normalized = normalize;

  for (std::size_t slot = 0; slot < surviving.size(); ++slot) {
    const std::size_t b = surviving[slot];
    double* dst = out.outputs.data() + slot * frame_size;
    double weight_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double w = weight_fn(t, b);
      if (w <= 0.0) continue;
      const double* src = seq.frame(t).data();
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] += w * src[j];
      weight_sum += w;
      ++count;
    }
    out.assignment.bin_counts.push_back(count);
    double scale = 1.0;
    if (kind == KernelKind::kKronecker) {
      scale = 1.0 / static_cast<double>(count);
    } else if (normalize) {
      scale = 1.0 / weight_sum;
    }
    if (scale != 1.0) {
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] *= scale;
    }
  }

  // Stored weights are the effective coefficients, so kronecker members
  // carry 1/count rather than the raw membership indicator.
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t b = 0; b < total_bins; ++b) {
      double w = weight_fn(t, b);
      if (w <= 0.0) continue;
      if (kind == KernelKind::kKronecker) {
        const std::size_t slot = static_cast<std::size_t>(
            std::lower_bound(surviving.begin(), surviving.end(), b) - surviving.begin());
        w /= static_cast<double>(out.assignment.bin_counts[slot]);
      }
      out.assignment.entries.push_back({t, b, w});
    }
  }
  return out;
}

}  // namespace

SampledSequence sample_forward(const FeatureSequence& seq, const MagnitudeTrack& delta,
                               const BinGeometry& geom, KernelKind kind,
                               const SampleOptions& opts) {
  if (delta.delta.size() != seq.t()) {
    throw ShapeError("coordinate track length does not match the frame count");
  }
  if (geom.degenerate) return pooled_average(seq);
  const auto weight_fn = [&](std::size_t t, std::size_t b) {
    return weight_of(kind, delta.delta[t], geom.centers[b], geom.gamma);
  };
  return dense_forward(seq, geom.bin_count, weight_fn, kind, opts);
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
    if (!g.degenerate) all_degenerate = false;
  }
  if (all_degenerate) return pooled_average(seq);

  std::vector<std::size_t> axis(k_len), stride(k_len, 1);
  for (std::size_t k = 0; k < k_len; ++k) {
    axis[k] = geom.per_coord[k].degenerate ? 1 : geom.per_coord[k].bin_count;
  }
  for (std::size_t k = k_len - 1; k-- > 0;) stride[k] = stride[k + 1] * axis[k + 1];
  const std::size_t total = geom.grid_size();

  const auto weight_fn = [&](std::size_t t, std::size_t flat) {
    double w = 1.0;
    for (std::size_t k = 0; k < k_len; ++k) {
      const BinGeometry& g = geom.per_coord[k];
      if (g.degenerate) continue;
      const std::size_t b = (flat / stride[k]) % axis[k];
      w *= weight_of(kind, coords[t * k_len + k], g.centers[b], g.gamma);
      if (w == 0.0) break;
    }
    return w;
  };
  return dense_forward(seq, total, weight_fn, kind, opts);
}

SampleGrads sample_backward(const Tensor& out_grad, const SampledSequence& sampled,
                            const FeatureSequence& seq, const MagnitudeTrack& delta,
                            const BinGeometry& geom, KernelKind kind) {
  if (!out_grad.same_shape(sampled.outputs)) {
    throw ShapeError("upstream gradient shape does not match the sampled outputs");
  }
  if (sampled.assignment.normalized) {
    throw ConfigError("backward pass does not support normalized outputs");
  }
  const std::size_t t_len = seq.t();
  const std::size_t frame_size = seq.frame_size();

  SampleGrads g;
  g.frames = Tensor(seq.frames().shape());
  g.delta.assign(t_len, 0.0);

  if (sampled.assignment.pooled_fallback) {
    const double inv = 1.0 / static_cast<double>(t_len);
    const double* up = out_grad.data();
    for (std::size_t t = 0; t < t_len; ++t) {
      double* dst = g.frames.data() + t * frame_size;
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] += inv * up[j];
    }
    return g;
  }

  for (std::size_t slot = 0; slot < sampled.surviving_bins.size(); ++slot) {
    const std::size_t b = sampled.surviving_bins[slot];
    const double* up = out_grad.data() + slot * frame_size;

    std::size_t count = 0;
    if (kind == KernelKind::kKronecker) {
      for (std::size_t t = 0; t < t_len; ++t) {
        if (weight_of(kind, delta.delta[t], geom.centers[b], geom.gamma) > 0.0) ++count;
      }
    }

    for (std::size_t t = 0; t < t_len; ++t) {
      const double w = weight_of(kind, delta.delta[t], geom.centers[b], geom.gamma);
      if (w <= 0.0) continue;
      const double eff = kind == KernelKind::kKronecker ? w / static_cast<double>(count) : w;
      double* dst = g.frames.data() + t * frame_size;
      for (std::size_t j = 0; j < frame_size; ++j) dst[j] += eff * up[j];

      if (kind == KernelKind::kLinear) {
        const double* frame = seq.frame(t).data();
        double inner = 0.0;
        for (std::size_t j = 0; j < frame_size; ++j) inner += up[j] * frame[j];
        const double sign = delta.delta[t] <= geom.centers[b] ? 1.0 : -1.0;
        g.delta[t] += sign / geom.gamma * inner;
      }
    }
  }
  return g;
}

}  // namespace sgs::reference
