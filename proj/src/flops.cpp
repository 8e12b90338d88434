#include "sgs/flops.hpp"

#include <fstream>
#include <sstream>

#include "sgs/errors.hpp"

namespace sgs {

namespace {

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t s, PaddingPolicy pad,
                       const char* axis) {
  if (in == 0) throw ConfigError(std::string("conv3d input extent is zero on the ") + axis + " axis");
  if (pad == PaddingPolicy::kSame) return (in + s - 1) / s;
  if (k > in) {
    std::ostringstream msg;
    msg << "conv3d kernel " << k << " exceeds input extent " << in << " on the " << axis
        << " axis with valid padding";
    throw ConfigError(msg.str());
  }
  return (in - k) / s + 1;
}

void check_layer(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::kConv3d:
      if (layer.c_in == 0 || layer.c_out == 0) throw ConfigError("conv3d channels must be positive");
      if (layer.kt == 0 || layer.kh == 0 || layer.kw == 0) {
        throw ConfigError("conv3d kernel dims must be positive");
      }
      if (layer.st == 0 || layer.sh == 0 || layer.sw == 0) {
        throw ConfigError("conv3d strides must be positive");
      }
      break;
    case LayerKind::kFc:
      if (layer.c_in == 0 || layer.c_out == 0) throw ConfigError("fc channels must be positive");
      break;
    case LayerKind::kPool:
      break;
  }
}

}  // namespace

std::uint64_t layer_flops(const LayerSpec& layer, std::size_t t_len) {
  if (t_len == 0) throw ConfigError("temporal length must be positive");
  check_layer(layer);
  switch (layer.kind) {
    case LayerKind::kConv3d: {
      const std::uint64_t t_out = out_extent(t_len, layer.kt, layer.st, layer.pad, "temporal");
      const std::uint64_t h_out = out_extent(layer.h_in, layer.kh, layer.sh, layer.pad, "height");
      const std::uint64_t w_out = out_extent(layer.w_in, layer.kw, layer.sw, layer.pad, "width");
      return 2ULL * layer.c_in * layer.c_out * layer.kt * layer.kh * layer.kw * t_out * h_out *
             w_out;
    }
    case LayerKind::kFc:
      return 2ULL * layer.c_in * layer.c_out;
    case LayerKind::kPool:
      return 0;
  }
  throw ConfigError("invalid layer kind");
}

std::uint64_t stack_flops(const std::vector<LayerSpec>& stack, std::size_t t_len, std::size_t h0,
                          std::size_t w0) {
  if (t_len == 0) throw ConfigError("temporal length must be positive");
  std::uint64_t total = 0;
  std::size_t t = t_len, h = h0, w = w0;
  std::size_t channels = 0;  // 0 = not yet pinned by a layer
  for (const LayerSpec& spec : stack) {
    LayerSpec layer = spec;
    check_layer(layer);
    switch (layer.kind) {
      case LayerKind::kConv3d: {
        if (channels != 0 && layer.c_in != channels) {
          throw ConfigError("conv3d input channels do not match the previous layer");
        }
        layer.h_in = h;
        layer.w_in = w;
        total += layer_flops(layer, t);
        t = out_extent(t, layer.kt, layer.st, layer.pad, "temporal");
        h = out_extent(h, layer.kh, layer.sh, layer.pad, "height");
        w = out_extent(w, layer.kw, layer.sw, layer.pad, "width");
        channels = layer.c_out;
        break;
      }
      case LayerKind::kFc:
        if (channels != 0 && layer.c_in != channels) {
          throw ConfigError("fc input channels do not match the previous layer");
        }
        total += layer_flops(layer, t);
        channels = layer.c_out;
        t = h = w = 1;
        break;
      case LayerKind::kPool:
        h = w = 1;
        break;
    }
  }
  return total;
}

std::vector<LayerSpec> parse_stack(std::istream& in) {
  std::vector<LayerSpec> stack;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string kind;
    if (!(fields >> kind)) continue;

    const auto fail = [&](const std::string& what) -> ConfigError {
      std::ostringstream msg;
      msg << "stack line " << line_no << ": " << what;
      return ConfigError(msg.str());
    };
    const auto next_size = [&](const char* what) {
      long long v = 0;
      if (!(fields >> v) || v <= 0) {
        throw fail(std::string("expected positive integer for ") + what);
      }
      return static_cast<std::size_t>(v);
    };

    LayerSpec layer;
    if (kind == "conv3d") {
      layer.kind = LayerKind::kConv3d;
      layer.c_in = next_size("c_in");
      layer.c_out = next_size("c_out");
      layer.kt = next_size("kt");
      layer.kh = next_size("kh");
      layer.kw = next_size("kw");
      layer.st = next_size("st");
      layer.sh = next_size("sh");
      layer.sw = next_size("sw");
      std::string pad;
      if (!(fields >> pad)) throw fail("missing pad field");
      if (pad == "pad=same") {
        layer.pad = PaddingPolicy::kSame;
      } else if (pad == "pad=valid") {
        layer.pad = PaddingPolicy::kValid;
      } else {
        throw fail("pad must be pad=same or pad=valid, got '" + pad + "'");
      }
    } else if (kind == "fc") {
      layer.kind = LayerKind::kFc;
      layer.c_in = next_size("c_in");
      layer.c_out = next_size("c_out");
    } else if (kind == "pool") {
      layer.kind = LayerKind::kPool;
    } else {
      throw fail("unknown layer kind '" + kind + "'");
    }
    std::string extra;
    if (fields >> extra) throw fail("unexpected trailing field '" + extra + "'");
    stack.push_back(layer);
  }
  return stack;
}

std::vector<LayerSpec> load_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stack file '" + path + "'");
  return parse_stack(in);
}

FlopReport report(const std::vector<std::pair<std::string, std::size_t>>& clip_bprimes,
                  const std::vector<LayerSpec>& stack, std::size_t t_full, std::size_t h0,
                  std::size_t w0) {
  if (clip_bprimes.empty()) throw ConfigError("cannot report over an empty corpus");
  if (t_full == 0) throw ConfigError("full temporal length must be positive");

  FlopReport rep;
  rep.baseline_flops = static_cast<double>(stack_flops(stack, t_full, h0, w0));
  double sum = 0.0;
  for (const auto& [clip, bprime] : clip_bprimes) {
    if (bprime == 0 || bprime > t_full) {
      throw ConfigError("clip '" + clip + "' has an out-of-range temporal length");
    }
    const std::uint64_t f = stack_flops(stack, bprime, h0, w0);
    rep.per_clip.push_back({clip, bprime, f});
    sum += static_cast<double>(f);
  }
  rep.average_flops = sum / static_cast<double>(rep.per_clip.size());
  rep.reduction_fraction =
      rep.baseline_flops > 0.0 ? 1.0 - rep.average_flops / rep.baseline_flops : 0.0;
  return rep;
}

}  // namespace sgs
