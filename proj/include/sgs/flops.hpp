#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sgs {

// Analytic cost model of a downstream layer stack as a function of temporal
// length. Conventions (stated in every report): one multiply-accumulate
// counts as 2 FLOPs; pooling, activations and biases count as 0.
enum class LayerKind { kConv3d, kFc, kPool };
enum class PaddingPolicy { kSame, kValid };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv3d;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t kt = 1, kh = 1, kw = 1;
  std::size_t st = 1, sh = 1, sw = 1;
  PaddingPolicy pad = PaddingPolicy::kSame;
  // Input spatial size, filled in by stack propagation (or directly by the
  // caller for a standalone layer).
  std::size_t h_in = 0;
  std::size_t w_in = 0;
};

// FLOPs of one layer at temporal length t_len.
//   conv3d: 2 * c_in * c_out * kt * kh * kw * T_out * H_out * W_out
//   fc:     2 * c_in * c_out (applied once, after global pooling)
//   pool:   0 (global spatial pool marker)
// Valid padding with a kernel larger than the input is a configuration error.
std::uint64_t layer_flops(const LayerSpec& layer, std::size_t t_len);

// Folds layer_flops over the stack, propagating output dims (t, c, h, w)
// between layers starting from spatial size h0 x w0.
std::uint64_t stack_flops(const std::vector<LayerSpec>& stack, std::size_t t_len, std::size_t h0,
                          std::size_t w0);

// Line-oriented stack description, '#' comments allowed:
//   conv3d c_in c_out kt kh kw st sh sw pad={same|valid}
//   fc c_in c_out
//   pool
std::vector<LayerSpec> parse_stack(std::istream& in);
std::vector<LayerSpec> load_stack(const std::string& path);

struct ClipFlops {
  std::string clip;
  std::size_t bprime = 0;
  std::uint64_t flops = 0;
};

struct FlopReport {
  std::vector<ClipFlops> per_clip;  // evaluated at t_len = bprime
  double average_flops = 0.0;
  double baseline_flops = 0.0;  // same stack at the full temporal length
  double reduction_fraction = 0.0;
};

FlopReport report(const std::vector<std::pair<std::string, std::size_t>>& clip_bprimes,
                  const std::vector<LayerSpec>& stack, std::size_t t_full, std::size_t h0,
                  std::size_t w0);

}  // namespace sgs
