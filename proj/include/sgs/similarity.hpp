#pragma once

#include "sgs/rng.hpp"
#include "sgs/tensor.hpp"

namespace sgs {

// Parameters of the embedding network: spatial pooling followed by two
// pointwise (kernel size 1) convolutions C -> C -> L with a relu in between.
// Kernel size 1 means every time step is transformed independently.
struct SimilarityParams {
  Tensor w1;  // C x C
  Tensor b1;  // C
  Tensor w2;  // L x C
  Tensor b2;  // L

  std::size_t channels() const { return w1.dim(0); }
  std::size_t embed_dim() const { return w2.dim(0); }

  void validate() const;

  // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static SimilarityParams init(std::size_t channels, std::size_t embed_dim, SeededRng& rng);
};

// Per-frame embedding vectors, shape T x L.
struct SimilarityVectors {
  Tensor z;

  std::size_t t() const { return z.dim(0); }
  std::size_t l() const { return z.dim(1); }
};

// Forward intermediates retained for the backward pass.
struct EmbedCache {
  Tensor pooled;  // T x C, spatial mean of the input frames
  Tensor preact;  // T x C, w1 * pooled + b1 before the relu
  Tensor hidden;  // T x C, relu(preact)
};

SimilarityVectors embed_forward(const FeatureSequence& seq, const SimilarityParams& params,
                                EmbedCache* cache = nullptr);

struct EmbedGrads {
  SimilarityParams params;  // same shapes as the forward parameters
  Tensor pooled;            // T x C, gradient w.r.t. the pooled input
};

// Chain rule through the two affine maps and the relu gate (subgradient 0 at
// exactly 0). The pooled gradient maps to per-frame gradients by distributing
// 1/(H*W) uniformly, which callers do where the frame shape is known.
EmbedGrads embed_backward(const Tensor& z_grad, const EmbedCache& cache,
                          const SimilarityParams& params);

// Exact (bitwise on the value level) parameter equality.
bool same_values(const SimilarityParams& a, const SimilarityParams& b);

}  // namespace sgs
