#pragma once

#include <string>
#include <vector>

#include "sgs/binning.hpp"
#include "sgs/similarity.hpp"
#include "sgs/tensor.hpp"

namespace sgs {

// linear:    triangle weight max(0, 1 - |delta - beta| / gamma).
// kronecker: membership floor(|delta - beta| / gamma) == 0; aggregation
//            averages the members of each bin.
enum class KernelKind { kLinear, kKronecker };

KernelKind parse_kernel(const std::string& name);
std::string kernel_name(KernelKind k);

double kernel_weight(KernelKind kind, double delta_t, double beta_b, double gamma);

struct WeightEntry {
  std::size_t frame;
  std::size_t bin;  // original (flattened, for grids) bin index, 0-based
  double weight;
};

// Sparse frame->bin weights. Bin supports are disjoint, so every frame
// appears in at most one entry, for both kernels.
struct WeightAssignment {
  std::vector<WeightEntry> entries;     // ascending frame index
  std::vector<std::size_t> bin_counts;  // frames per surviving bin, all >= 1
  // All frames were averaged into one bin: either degenerate geometry, or no
  // bin received positive weight (every coordinate sat exactly on a support
  // edge, e.g. all magnitudes equal in strict mode).
  bool pooled_fallback = false;
  // Outputs were divided by the per-bin weight sum (forward-only option).
  bool normalized = false;
};

struct SampledSequence {
  Tensor outputs;                           // B' x C x H x W
  std::vector<std::size_t> surviving_bins;  // ascending original bin indices
  WeightAssignment assignment;

  std::size_t bin_prime() const { return surviving_bins.size(); }
};

struct SampleOptions {
  // Divide each linear-kernel output by its total weight. Off by default;
  // the plain weighted sum is the reference behavior. No effect on the
  // kronecker kernel, which is already an average. Forward-only: the
  // backward pass rejects normalized assignments.
  bool normalize = false;
};

// Aggregates frames into bins. Empty bins are dropped; surviving bins keep
// ascending index order. B' is always >= 1: degenerate geometry and the
// all-empty edge case fall back to a single bin holding the plain average of
// all frames.
SampledSequence sample_forward(const FeatureSequence& seq, const MagnitudeTrack& delta,
                               const BinGeometry& geom, KernelKind kind,
                               const SampleOptions& opts = {});

// Grid variant: the weight of frame t for grid bin (b_1..b_K) is the product
// of per-coordinate kernel weights. Surviving bins are ordered by flattened
// (lexicographic) grid index. K = 1 with a radial coordinate reproduces
// sample_forward exactly.
SampledSequence sample_forward_multidim(const FeatureSequence& seq, const Tensor& coords,
                                        const MultiDimGeometry& geom, KernelKind kind,
                                        const SampleOptions& opts = {});

struct SampleGrads {
  Tensor frames;              // T x C x H x W
  std::vector<double> delta;  // length T; identically 0 for the kronecker kernel
};

// Backward through the aggregation, treating gamma and the centers as
// constants. Frame gradients reuse the forward weights; the delta gradient is
// +1/gamma on (beta - gamma, beta] and -1/gamma on (beta, beta + gamma),
// scaled by the inner product of the upstream gradient with the frame.
// `delta` must be the track the forward pass saw.
SampleGrads sample_backward(const Tensor& out_grad, const SampledSequence& sampled,
                            const FeatureSequence& seq, const MagnitudeTrack& delta,
                            const BinGeometry& geom, KernelKind kind);

struct SgsConfig {
  std::size_t bins = 0;
  BinMode mode = BinMode::kStrict;
  KernelKind kernel = KernelKind::kLinear;
  Measure measure = Measure::kMagnitude;
  // Bins per coordinate for the angular/spherical measures; when empty every
  // coordinate uses `bins`.
  std::vector<std::size_t> bins_per_coord;
  bool normalize = false;
};

// Everything the backward pass needs, captured at forward time.
struct SgsCache {
  FeatureSequence seq;
  SimilarityParams params;
  EmbedCache embed;
  SimilarityVectors z;
  MagnitudeTrack delta;    // magnitude measure only
  Tensor coords;           // angular/spherical measures only
  BinGeometry geom;        // magnitude measure only
  MultiDimGeometry multi_geom;
  SgsConfig config;
  SampledSequence sampled;
};

struct SgsResult {
  SampledSequence sampled;
  SgsCache cache;
};

// End-to-end: embedding -> bin coordinates -> geometry -> aggregation.
// `frozen_geom` overrides the derived geometry (magnitude measure only),
// holding bins constant across evaluations for gradient checking.
SgsResult sgs_apply(const FeatureSequence& seq, const SimilarityParams& params,
                    const SgsConfig& config, const BinGeometry* frozen_geom = nullptr);

struct SgsGrads {
  Tensor frames;  // T x C x H x W, both the direct and the embedding path
  SimilarityParams params;
};

// Composes sample_backward, d(delta)/dz = z / |z| (zero vector -> zero
// gradient) and embed_backward. Bin geometry stays on the stop-gradient
// path. Magnitude measure only.
SgsGrads sgs_backward(const Tensor& out_grad, const SgsCache& cache);

}  // namespace sgs
