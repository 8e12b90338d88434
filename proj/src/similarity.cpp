#include "sgs/similarity.hpp"

#include <cmath>

namespace sgs {

void SimilarityParams::validate() const {
  if (w1.rank() != 2 || w1.dim(0) != w1.dim(1)) {
    throw ShapeError("w1 must be square C x C, got " + w1.shape_str());
  }
  const std::size_t c = w1.dim(0);
  if (b1.rank() != 1 || b1.dim(0) != c) {
    throw ShapeError("b1 must have shape [C], got " + b1.shape_str());
  }
  if (w2.rank() != 2 || w2.dim(1) != c) {
    throw ShapeError("w2 must be L x C, got " + w2.shape_str());
  }
  if (b2.rank() != 1 || b2.dim(0) != w2.dim(0)) {
    throw ShapeError("b2 must have shape [L], got " + b2.shape_str());
  }
}

SimilarityParams SimilarityParams::init(std::size_t channels, std::size_t embed_dim,
                                        SeededRng& rng) {
  if (channels == 0 || embed_dim == 0) throw ConfigError("channels and embed_dim must be positive");
  SimilarityParams p;
  p.w1 = Tensor({channels, channels});
  p.b1 = Tensor({channels});
  p.w2 = Tensor({embed_dim, channels});
  p.b2 = Tensor({embed_dim});
  const double a1 = std::sqrt(6.0 / static_cast<double>(channels + channels));
  const double a2 = std::sqrt(6.0 / static_cast<double>(channels + embed_dim));
  rng.fill_uniform(p.w1.values(), -a1, a1);
  rng.fill_uniform(p.w2.values(), -a2, a2);
  return p;
}

SimilarityVectors embed_forward(const FeatureSequence& seq, const SimilarityParams& params,
                                EmbedCache* cache) {
  params.validate();
  if (seq.c() != params.channels()) {
    throw ShapeError("sequence channel count does not match embedding parameters");
  }
  const std::size_t t_len = seq.t();
  const std::size_t c_len = params.channels();
  const std::size_t l_len = params.embed_dim();

  Tensor pooled = gap_spatial(seq);  // T x C
  Tensor preact({t_len, c_len});
  Tensor hidden({t_len, c_len});
  Tensor z({t_len, l_len});

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ts = 0; ts < static_cast<std::ptrdiff_t>(t_len); ++ts) {
    const std::size_t t = static_cast<std::size_t>(ts);
    const double* x = pooled.data() + t * c_len;
    double* pre = preact.data() + t * c_len;
    double* hid = hidden.data() + t * c_len;
    for (std::size_t j = 0; j < c_len; ++j) {
      double acc = params.b1[j];
      const double* row = params.w1.data() + j * c_len;
      for (std::size_t k = 0; k < c_len; ++k) acc += row[k] * x[k];
      pre[j] = acc;
      hid[j] = acc > 0.0 ? acc : 0.0;
    }
    double* zt = z.data() + t * l_len;
    for (std::size_t j = 0; j < l_len; ++j) {
      double acc = params.b2[j];
      const double* row = params.w2.data() + j * c_len;
      for (std::size_t k = 0; k < c_len; ++k) acc += row[k] * hid[k];
      zt[j] = acc;
    }
  }

  if (cache) {
    cache->pooled = pooled;
    cache->preact = std::move(preact);
    cache->hidden = std::move(hidden);
  }
  return SimilarityVectors{std::move(z)};
}

bool same_values(const SimilarityParams& a, const SimilarityParams& b) {
  const auto eq = [](const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] != y[i]) return false;
    }
    return true;
  };
  return eq(a.w1, b.w1) && eq(a.b1, b.b1) && eq(a.w2, b.w2) && eq(a.b2, b.b2);
}

EmbedGrads embed_backward(const Tensor& z_grad, const EmbedCache& cache,
                          const SimilarityParams& params) {
  params.validate();
  const std::size_t t_len = cache.pooled.dim(0);
  const std::size_t c_len = params.channels();
  const std::size_t l_len = params.embed_dim();
  if (z_grad.rank() != 2 || z_grad.dim(0) != t_len || z_grad.dim(1) != l_len) {
    throw ShapeError("z gradient shape mismatch, got " + z_grad.shape_str());
  }

  EmbedGrads g;
  g.params.w1 = Tensor({c_len, c_len});
  g.params.b1 = Tensor({c_len});
  g.params.w2 = Tensor({l_len, c_len});
  g.params.b2 = Tensor({l_len});
  g.pooled = Tensor({t_len, c_len});

  // Serial over t: parameter gradients accumulate across frames and stay
  // bit-identical to the single-threaded order.
  std::vector<double> hidden_grad(c_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* gz = z_grad.data() + t * l_len;
    const double* hid = cache.hidden.data() + t * c_len;
    const double* pre = cache.preact.data() + t * c_len;
    const double* x = cache.pooled.data() + t * c_len;

    std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0);
    for (std::size_t j = 0; j < l_len; ++j) {
      const double gj = gz[j];
      g.params.b2[j] += gj;
      double* wrow = g.params.w2.data() + j * c_len;
      const double* row = params.w2.data() + j * c_len;
      for (std::size_t k = 0; k < c_len; ++k) {
        wrow[k] += gj * hid[k];
        hidden_grad[k] += gj * row[k];
      }
    }

    double* gx = g.pooled.data() + t * c_len;
    for (std::size_t j = 0; j < c_len; ++j) {
      const double gj = pre[j] > 0.0 ? hidden_grad[j] : 0.0;
      if (gj == 0.0) continue;
      g.params.b1[j] += gj;
      double* wrow = g.params.w1.data() + j * c_len;
      const double* row = params.w1.data() + j * c_len;
      for (std::size_t k = 0; k < c_len; ++k) {
        wrow[k] += gj * x[k];
        gx[k] += gj * row[k];
      }
    }
  }
  return g;
}

}  // namespace sgs
