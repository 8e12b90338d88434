#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sgs/errors.hpp"
#include "sgs/flops.hpp"

using namespace sgs;

namespace {

LayerSpec conv(std::size_t c_in, std::size_t c_out, std::size_t kt, std::size_t kh,
               std::size_t kw, PaddingPolicy pad = PaddingPolicy::kSame) {
  LayerSpec l;
  l.kind = LayerKind::kConv3d;
  l.c_in = c_in;
  l.c_out = c_out;
  l.kt = kt;
  l.kh = kh;
  l.kw = kw;
  l.pad = pad;
  return l;
}

std::vector<LayerSpec> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_stack(in);
}

}  // namespace

TEST_CASE("worked conv example counts 1806336 flops") {
  // 1x3x3 kernel, stride 1, same padding, 8 -> 16 channels on a 4x14x14
  // input: 2 * 8 * 16 * 9 * 4 * 14 * 14.
  LayerSpec l = conv(8, 16, 1, 3, 3);
  l.h_in = 14;
  l.w_in = 14;
  CHECK(layer_flops(l, 4) == 1806336ULL);
}

TEST_CASE("fc counts one multiply-accumulate per weight") {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.c_in = 512;
  l.c_out = 10;
  CHECK(layer_flops(l, 1) == 10240ULL);
  // fc runs once on the pooled features, independent of t.
  CHECK(layer_flops(l, 7) == 10240ULL);
}

TEST_CASE("pooling is free by convention") {
  LayerSpec l;
  l.kind = LayerKind::kPool;
  CHECK(layer_flops(l, 16) == 0ULL);
}

TEST_CASE("temporal-preserving layers are linear in t") {
  LayerSpec l = conv(4, 4, 3, 3, 3);
  l.h_in = 8;
  l.w_in = 8;
  const std::uint64_t base = layer_flops(l, 5);
  CHECK(layer_flops(l, 10) == 2 * base);

  const std::vector<LayerSpec> stack = {conv(4, 8, 3, 3, 3), conv(8, 8, 1, 1, 1)};
  const std::uint64_t s1 = stack_flops(stack, 6, 8, 8);
  CHECK(stack_flops(stack, 12, 8, 8) == 2 * s1);
}

TEST_CASE("valid padding shrinks the output and rejects oversized kernels") {
  LayerSpec l = conv(1, 1, 2, 3, 3, PaddingPolicy::kValid);
  l.h_in = 5;
  l.w_in = 5;
  // t_out = (4 - 2) / 1 + 1 = 3, spatial 3x3.
  CHECK(layer_flops(l, 4) == 2ULL * 1 * 1 * 2 * 3 * 3 * 3 * 3 * 3);

  LayerSpec big = conv(1, 1, 8, 1, 1, PaddingPolicy::kValid);
  big.h_in = 5;
  big.w_in = 5;
  CHECK_THROWS_AS(layer_flops(big, 4), ConfigError);
}

TEST_CASE("strides divide the output extent with same padding") {
  LayerSpec l = conv(2, 2, 1, 1, 1);
  l.st = 2;
  l.h_in = 7;
  l.w_in = 7;
  l.sh = 2;
  l.sw = 2;
  // ceil(5/2) = 3 temporal, ceil(7/2) = 4 spatial.
  CHECK(layer_flops(l, 5) == 2ULL * 2 * 2 * 1 * 3 * 4 * 4);
}

TEST_CASE("stacks fold and validate channel chaining") {
  CHECK(stack_flops({}, 8, 14, 14) == 0ULL);

  const std::vector<LayerSpec> one = {conv(8, 16, 1, 3, 3)};
  CHECK(stack_flops(one, 4, 14, 14) == 1806336ULL);

  // Two independent stride-1 same-padding convs add up.
  const std::vector<LayerSpec> two = {conv(8, 16, 1, 3, 3), conv(16, 8, 1, 3, 3)};
  LayerSpec second = conv(16, 8, 1, 3, 3);
  second.h_in = 14;
  second.w_in = 14;
  CHECK(stack_flops(two, 4, 14, 14) == 1806336ULL + layer_flops(second, 4));

  const std::vector<LayerSpec> broken = {conv(8, 16, 1, 3, 3), conv(8, 8, 1, 3, 3)};
  CHECK_THROWS_AS(stack_flops(broken, 4, 14, 14), ConfigError);
}

TEST_CASE("fc collapses every dimension to one") {
  LayerSpec head;
  head.kind = LayerKind::kFc;
  head.c_in = 16;
  head.c_out = 4;
  std::vector<LayerSpec> stack = {conv(8, 16, 1, 3, 3), head, conv(4, 4, 1, 1, 1)};
  // The trailing conv sees a 1x1x1 input: 2 * 4 * 4 * 1.
  CHECK(stack_flops(stack, 4, 14, 14) == 1806336ULL + 2ULL * 16 * 4 + 2ULL * 4 * 4);

  LayerSpec wrong = head;
  wrong.c_in = 7;
  CHECK_THROWS_AS(stack_flops({conv(8, 16, 1, 3, 3), wrong}, 4, 14, 14), ConfigError);
}

TEST_CASE("stack text format parses layers and comments") {
  const std::vector<LayerSpec> stack = parse(
      "# backbone slice\n"
      "conv3d 8 16 1 3 3 1 1 1 pad=same\n"
      "\n"
      "pool  # global spatial\n"
      "fc 16 10\n");
  REQUIRE(stack.size() == 3);
  CHECK(stack[0].kind == LayerKind::kConv3d);
  CHECK(stack[0].c_out == 16);
  CHECK(stack[0].pad == PaddingPolicy::kSame);
  CHECK(stack[1].kind == LayerKind::kPool);
  CHECK(stack[2].kind == LayerKind::kFc);
  CHECK(stack[2].c_out == 10);
}

TEST_CASE("stack parser reports the offending line") {
  CHECK_THROWS_WITH_AS(parse("conv3d 8 16 1 3 3 1 1 1 pad=reflect\n"),
                       doctest::Contains("stack line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("fc 16 10\nconv3d 8 16 1 3 3\n"),
                       doctest::Contains("stack line 2"), ConfigError);
  CHECK_THROWS_AS(parse("dense 16 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("fc 16 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("fc 16 10 extra\n"), ConfigError);
  CHECK_THROWS_AS(parse("conv3d 8 16 1 3 3 1 1 1\n"), ConfigError);
}

TEST_CASE("load_stack raises IoError for missing files") {
  CHECK_THROWS_AS(load_stack("/nonexistent/stack.txt"), IoError);
}

TEST_CASE("report averages per-clip costs against the baseline") {
  const std::vector<LayerSpec> stack = {conv(8, 8, 3, 3, 3)};
  const std::vector<std::pair<std::string, std::size_t>> corpus = {{"a", 2}, {"b", 4}};
  FlopReport rep = report(corpus, stack, 8, 14, 14);

  REQUIRE(rep.per_clip.size() == 2);
  CHECK(rep.per_clip[0].flops == stack_flops(stack, 2, 14, 14));
  CHECK(rep.per_clip[1].flops == stack_flops(stack, 4, 14, 14));
  CHECK(rep.baseline_flops == static_cast<double>(stack_flops(stack, 8, 14, 14)));
  // Temporal-preserving stack: reduction = 1 - mean(2, 4) / 8.
  CHECK(rep.reduction_fraction == doctest::Approx(0.625).epsilon(1e-15));

  CHECK_THROWS_AS(report({}, stack, 8, 14, 14), ConfigError);
  CHECK_THROWS_AS(report({{"c", 9}}, stack, 8, 14, 14), ConfigError);
  CHECK_THROWS_AS(report({{"c", 0}}, stack, 8, 14, 14), ConfigError);
}
