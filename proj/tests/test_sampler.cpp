#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "sgs/binning.hpp"
#include "sgs/errors.hpp"
#include "sgs/finite_diff.hpp"
#include "sgs/reference_sampler.hpp"
#include "sgs/rng.hpp"
#include "sgs/sampler.hpp"
#include "sgs/similarity.hpp"
#include "sgs/tensor.hpp"

using namespace sgs;

namespace {

// The running hand example: three scalar frames with magnitudes [1, 1, 3].
FeatureSequence scalar_frames() {
  FeatureSequence seq(3, 1, 1, 1);
  seq.frames() = Tensor({3, 1, 1, 1}, {10.0, 20.0, 30.0});
  return seq;
}

const MagnitudeTrack kHandTrack{{1.0, 1.0, 3.0}};

FeatureSequence random_frames(std::size_t t, std::size_t c, std::size_t h, std::size_t w,
                              SeededRng& rng) {
  FeatureSequence seq(t, c, h, w);
  rng.fill_normal(seq.frames().values());
  return seq;
}

MagnitudeTrack random_track(std::size_t t, SeededRng& rng) {
  MagnitudeTrack d;
  d.delta.resize(t);
  for (double& v : d.delta) v = rng.uniform(0.0, 4.0);
  return d;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void check_same_sampling(const SampledSequence& got, const SampledSequence& want,
                         double tol = 0.0) {
  CHECK(got.surviving_bins == want.surviving_bins);
  CHECK(got.assignment.bin_counts == want.assignment.bin_counts);
  CHECK(got.assignment.pooled_fallback == want.assignment.pooled_fallback);
  REQUIRE(got.assignment.entries.size() == want.assignment.entries.size());
  for (std::size_t i = 0; i < got.assignment.entries.size(); ++i) {
    CHECK(got.assignment.entries[i].frame == want.assignment.entries[i].frame);
    CHECK(got.assignment.entries[i].bin == want.assignment.entries[i].bin);
    CHECK(std::fabs(got.assignment.entries[i].weight - want.assignment.entries[i].weight) <= tol);
  }
  CHECK(max_abs_diff(got.outputs, want.outputs) <= tol);
}

// Draws a track whose entries all sit well away from the kink grid of the
// given geometry, so finite differences stay on one linear piece.
MagnitudeTrack kink_safe_track(std::size_t t, const BinGeometry& geom, SeededRng& rng) {
  const double span = 2.0 * geom.gamma * static_cast<double>(geom.bin_count);
  MagnitudeTrack d;
  d.delta.resize(t);
  for (double& v : d.delta) {
    for (int tries = 0; tries < 1000; ++tries) {
      v = rng.uniform(0.0, span);
      const double q = v / geom.gamma;
      if (std::fabs(q - std::round(q)) > 1e-2) break;
    }
  }
  return d;
}

double loss_of(const SampledSequence& s, const Tensor& upstream) {
  REQUIRE(s.outputs.size() == upstream.size());
  return dot(s.outputs.values(), upstream.values());
}

}  // namespace

TEST_CASE("kernel weights match the two definitions") {
  CHECK(kernel_weight(KernelKind::kLinear, 1.0, 1.0, 0.5) == 1.0);
  CHECK(kernel_weight(KernelKind::kLinear, 1.25, 1.0, 0.5) == 0.5);
  CHECK(kernel_weight(KernelKind::kLinear, 1.5, 1.0, 0.5) == 0.0);
  CHECK(kernel_weight(KernelKind::kLinear, 2.0, 1.0, 0.5) == 0.0);

  CHECK(kernel_weight(KernelKind::kKronecker, 1.2, 1.0, 0.5) == 1.0);
  CHECK(kernel_weight(KernelKind::kKronecker, 1.5, 1.0, 0.5) == 0.0);
  CHECK(kernel_weight(KernelKind::kKronecker, 0.51, 1.0, 0.5) == 1.0);

  CHECK_THROWS_AS(kernel_weight(KernelKind::kLinear, 1.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("centered linear hand example aggregates to [30, 30]") {
  FeatureSequence seq = scalar_frames();
  BinGeometry geom = make_geometry(kHandTrack, 2, BinMode::kCentered);
  SampledSequence out = sample_forward(seq, kHandTrack, geom, KernelKind::kLinear);

  CHECK(out.bin_prime() == 2);
  CHECK(out.surviving_bins == std::vector<std::size_t>{0, 1});
  CHECK(out.outputs[0] == 30.0);
  CHECK(out.outputs[1] == 30.0);
  CHECK(out.assignment.bin_counts == std::vector<std::size_t>{2, 1});
  CHECK_FALSE(out.assignment.pooled_fallback);
}

TEST_CASE("strict linear hand example drops the edge frame") {
  FeatureSequence seq = scalar_frames();
  BinGeometry geom = make_geometry(kHandTrack, 2, BinMode::kStrict);
  SampledSequence out = sample_forward(seq, kHandTrack, geom, KernelKind::kLinear);

  // w(1 -> 0.75) = 2/3 for both low frames; the max sits on the outer edge
  // with weight exactly 0 and is dropped.
  CHECK(out.bin_prime() == 1);
  CHECK(out.surviving_bins == std::vector<std::size_t>{0});
  CHECK(std::fabs(out.outputs[0] - 20.0) <= 1e-12);
}

TEST_CASE("centered kronecker hand example averages members") {
  FeatureSequence seq = scalar_frames();
  BinGeometry geom = make_geometry(kHandTrack, 2, BinMode::kCentered);
  SampledSequence out = sample_forward(seq, kHandTrack, geom, KernelKind::kKronecker);

  CHECK(out.bin_prime() == 2);
  CHECK(out.outputs[0] == 15.0);
  CHECK(out.outputs[1] == 30.0);
  // Effective weights satisfy weight * count = 1 per member.
  for (const WeightEntry& e : out.assignment.entries) {
    const std::size_t slot = static_cast<std::size_t>(
        std::lower_bound(out.surviving_bins.begin(), out.surviving_bins.end(), e.bin) -
        out.surviving_bins.begin());
    CHECK(e.weight * static_cast<double>(out.assignment.bin_counts[slot]) == 1.0);
  }
}

TEST_CASE("length mismatch is rejected") {
  FeatureSequence seq = scalar_frames();
  MagnitudeTrack track{{1.0, 2.0}};
  BinGeometry geom = make_geometry(track, 2, BinMode::kCentered);
  CHECK_THROWS_AS(sample_forward(seq, track, geom, KernelKind::kLinear), ShapeError);
}

TEST_CASE("degenerate geometry falls back to the pooled average") {
  FeatureSequence seq = scalar_frames();
  MagnitudeTrack flat{{0.0, 0.0, 0.0}};
  BinGeometry geom = make_geometry(flat, 4, BinMode::kStrict);
  REQUIRE(geom.degenerate);

  for (KernelKind kind : {KernelKind::kLinear, KernelKind::kKronecker}) {
    SampledSequence out = sample_forward(seq, flat, geom, kind);
    CHECK(out.bin_prime() == 1);
    CHECK(out.assignment.pooled_fallback);
    CHECK(out.outputs[0] == 20.0);
    CHECK(out.assignment.bin_counts == std::vector<std::size_t>{3});
    for (const WeightEntry& e : out.assignment.entries) {
      CHECK(e.weight == 1.0 / 3.0);
    }
  }
}

TEST_CASE("all-empty strict assignment falls back to the pooled average") {
  // A single frame in strict mode always lands on the outer edge.
  FeatureSequence seq(1, 1, 1, 1);
  seq.frames() = Tensor({1, 1, 1, 1}, {7.0});
  MagnitudeTrack track{{2.0}};
  BinGeometry geom = make_geometry(track, 3, BinMode::kStrict);
  REQUIRE_FALSE(geom.degenerate);

  SampledSequence out = sample_forward(seq, track, geom, KernelKind::kLinear);
  CHECK(out.assignment.pooled_fallback);
  CHECK(out.bin_prime() == 1);
  CHECK(out.outputs[0] == 7.0);
}

TEST_CASE("normalization divides by the bin weight sum, forward only") {
  FeatureSequence seq = scalar_frames();
  BinGeometry geom = make_geometry(kHandTrack, 2, BinMode::kStrict);
  SampleOptions opts;
  opts.normalize = true;
  SampledSequence out = sample_forward(seq, kHandTrack, geom, KernelKind::kLinear, opts);

  // Weight sum in the surviving bin is 4/3, so 20 / (4/3) = 15.
  CHECK(out.assignment.normalized);
  CHECK(std::fabs(out.outputs[0] - 15.0) <= 1e-12);

  Tensor up(out.outputs.shape());
  CHECK_THROWS_AS(sample_backward(up, out, seq, kHandTrack, geom, KernelKind::kLinear),
                  ConfigError);

  // The kronecker kernel is already an average; the flag is a no-op there.
  SampledSequence k = sample_forward(seq, kHandTrack, geom, KernelKind::kKronecker, opts);
  CHECK_FALSE(k.assignment.normalized);
}

TEST_CASE("optimized forward equals the dense reference") {
  std::uint64_t salt = 0;
  for (KernelKind kind : {KernelKind::kLinear, KernelKind::kKronecker}) {
    for (BinMode mode : {BinMode::kStrict, BinMode::kCentered}) {
      for (int rep = 0; rep < 25; ++rep) {
        SeededRng rng(SeededRng::derive(7100, salt++));
        const std::size_t t = 1 + rng.next_u64() % 24;
        const std::size_t bins = 1 + rng.next_u64() % 12;
        FeatureSequence seq = random_frames(t, 2, 2, 2, rng);
        MagnitudeTrack track = random_track(t, rng);
        BinGeometry geom = make_geometry(track, bins, mode);

        SampledSequence fast = sample_forward(seq, track, geom, kind);
        SampledSequence slow = reference::sample_forward(seq, track, geom, kind);
        // Per-bin accumulation order is engineered to match, so the results
        // agree bitwise, not just within tolerance.
        check_same_sampling(fast, slow, 0.0);
      }
    }
  }
}

TEST_CASE("optimized multidim forward equals the dense reference") {
  std::uint64_t salt = 0;
  for (KernelKind kind : {KernelKind::kLinear, KernelKind::kKronecker}) {
    for (BinMode mode : {BinMode::kStrict, BinMode::kCentered}) {
      for (int rep = 0; rep < 25; ++rep) {
        SeededRng rng(SeededRng::derive(7200, salt++));
        const std::size_t t = 1 + rng.next_u64() % 12;
        const std::size_t l = 2 + rng.next_u64() % 2;
        FeatureSequence seq = random_frames(t, 2, 2, 2, rng);
        Tensor zdata({t, l});
        rng.fill_normal(zdata.values());
        Tensor coords = to_spherical(SimilarityVectors{zdata});

        std::vector<std::size_t> bins(l);
        for (auto& b : bins) b = 1 + rng.next_u64() % 4;
        MultiDimGeometry geom =
            make_multidim_geometry(coords, bins, coord_kinds_for(Measure::kSpherical, l), mode);

        SampledSequence fast = sample_forward_multidim(seq, coords, geom, kind);
        SampledSequence slow = reference::sample_forward_multidim(seq, coords, geom, kind);
        check_same_sampling(fast, slow, 0.0);
      }
    }
  }
}

TEST_CASE("multidim with one radial coordinate reduces to sample_forward") {
  SeededRng rng(99);
  const std::size_t t = 9;
  FeatureSequence seq = random_frames(t, 2, 2, 2, rng);
  MagnitudeTrack track = random_track(t, rng);

  Tensor coords({t, 1});
  for (std::size_t i = 0; i < t; ++i) coords[i] = track.delta[i];
  MultiDimGeometry mg = make_multidim_geometry(coords, {5}, {CoordKind::kRadial},
                                               BinMode::kCentered);
  BinGeometry g = make_geometry(track, 5, BinMode::kCentered);
  REQUIRE(mg.per_coord[0].gamma == g.gamma);

  SampledSequence grid = sample_forward_multidim(seq, coords, mg, KernelKind::kLinear);
  SampledSequence line = sample_forward(seq, track, g, KernelKind::kLinear);
  check_same_sampling(grid, line, 0.0);
}

TEST_CASE("a frame outside one coordinate support joins no grid bin") {
  // Second coordinate of frame 1 sits on a kronecker cell edge; the zero
  // factor annihilates the product even though the first coordinate fits.
  FeatureSequence seq(2, 1, 1, 1);
  seq.frames() = Tensor({2, 1, 1, 1}, {5.0, 9.0});
  Tensor coords({2, 2}, {0.75, 0.75, 0.75, 2.0});

  MultiDimGeometry geom;
  geom.kinds = {CoordKind::kRadial, CoordKind::kRadial};
  BinGeometry axis;
  axis.bin_count = 2;
  axis.gamma = 0.5;
  axis.centers = {0.5, 1.5};
  geom.per_coord = {axis, axis};

  SampledSequence out = sample_forward_multidim(seq, coords, geom, KernelKind::kKronecker);
  REQUIRE(out.bin_prime() == 1);
  CHECK(out.outputs[0] == 5.0);
  CHECK(out.assignment.entries.size() == 1);
  CHECK(out.assignment.entries[0].frame == 0);
}

TEST_CASE("backward matches finite differences away from kinks") {
  std::uint64_t salt = 0;
  for (BinMode mode : {BinMode::kStrict, BinMode::kCentered}) {
    for (int rep = 0; rep < 8; ++rep) {
      SeededRng rng(SeededRng::derive(7300, salt++));
      const std::size_t t = 2 + rng.next_u64() % 10;
      const std::size_t bins = 2 + rng.next_u64() % 6;
      MagnitudeTrack probe{{rng.uniform(1.0, 3.0)}};
      BinGeometry geom = make_geometry(probe, bins, mode);
      MagnitudeTrack track = kink_safe_track(t, geom, rng);
      FeatureSequence seq = random_frames(t, 2, 2, 2, rng);

      SampledSequence out = sample_forward(seq, track, geom, KernelKind::kLinear);
      Tensor upstream(out.outputs.shape());
      rng.fill_normal(upstream.values());
      SampleGrads g = sample_backward(upstream, out, seq, track, geom, KernelKind::kLinear);

      Tensor fd_frames = finite_diff(
          [&](const Tensor& frames) {
            FeatureSequence probe_seq(frames);
            return loss_of(sample_forward(probe_seq, track, geom, KernelKind::kLinear), upstream);
          },
          seq.frames());
      CHECK(max_abs_diff(g.frames, fd_frames) < 1e-6);

      Tensor delta_tensor({t});
      for (std::size_t i = 0; i < t; ++i) delta_tensor[i] = track.delta[i];
      Tensor fd_delta = finite_diff(
          [&](const Tensor& d) {
            MagnitudeTrack probe_track;
            probe_track.delta.assign(d.values().begin(), d.values().end());
            return loss_of(sample_forward(seq, probe_track, geom, KernelKind::kLinear), upstream);
          },
          delta_tensor, 1e-7);
      for (std::size_t i = 0; i < t; ++i) {
        CHECK(g.delta[i] == doctest::Approx(fd_delta[i]).epsilon(1e-4));
      }

      SampleGrads ref = reference::sample_backward(upstream, out, seq, track, geom,
                                                   KernelKind::kLinear);
      CHECK(max_abs_diff(g.frames, ref.frames) == 0.0);
      for (std::size_t i = 0; i < t; ++i) CHECK(g.delta[i] == ref.delta[i]);
    }
  }
}

TEST_CASE("negating the delta slope is caught by the oracle") {
  // Mutation sanity check: the finite-difference oracle must reject a
  // deliberately sign-flipped delta gradient.
  SeededRng rng(4242);
  const std::size_t t = 6;
  MagnitudeTrack probe{{2.0}};
  BinGeometry geom = make_geometry(probe, 3, BinMode::kCentered);
  MagnitudeTrack track = kink_safe_track(t, geom, rng);
  FeatureSequence seq = random_frames(t, 2, 2, 2, rng);

  SampledSequence out = sample_forward(seq, track, geom, KernelKind::kLinear);
  Tensor upstream(out.outputs.shape());
  rng.fill_normal(upstream.values());
  SampleGrads g = sample_backward(upstream, out, seq, track, geom, KernelKind::kLinear);

  Tensor delta_tensor({t});
  for (std::size_t i = 0; i < t; ++i) delta_tensor[i] = track.delta[i];
  Tensor fd_delta = finite_diff(
      [&](const Tensor& d) {
        MagnitudeTrack probe_track;
        probe_track.delta.assign(d.values().begin(), d.values().end());
        return loss_of(sample_forward(seq, probe_track, geom, KernelKind::kLinear), upstream);
      },
      delta_tensor, 1e-7);

  double honest = 0.0, corrupted = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    honest = std::max(honest, std::fabs(g.delta[i] - fd_delta[i]));
    corrupted = std::max(corrupted, std::fabs(-g.delta[i] - fd_delta[i]));
    scale = std::max(scale, std::fabs(fd_delta[i]));
  }
  REQUIRE(scale > 1e-3);  // the case must actually exercise the slope
  CHECK(honest / scale < 1e-5);
  CHECK(corrupted / scale > 1e-2);
}

TEST_CASE("kronecker delta gradient is identically zero") {
  SeededRng rng(515);
  const std::size_t t = 7;
  MagnitudeTrack probe{{2.0}};
  BinGeometry geom = make_geometry(probe, 3, BinMode::kStrict);
  MagnitudeTrack track = kink_safe_track(t, geom, rng);
  FeatureSequence seq = random_frames(t, 2, 2, 2, rng);

  SampledSequence out = sample_forward(seq, track, geom, KernelKind::kKronecker);
  Tensor upstream(out.outputs.shape());
  rng.fill_normal(upstream.values());
  SampleGrads g = sample_backward(upstream, out, seq, track, geom, KernelKind::kKronecker);
  for (double v : g.delta) CHECK(v == 0.0);

  // Away from cell edges the function is locally constant in delta, so the
  // finite difference is zero too.
  Tensor delta_tensor({t});
  for (std::size_t i = 0; i < t; ++i) delta_tensor[i] = track.delta[i];
  Tensor fd_delta = finite_diff(
      [&](const Tensor& d) {
        MagnitudeTrack probe_track;
        probe_track.delta.assign(d.values().begin(), d.values().end());
        return loss_of(sample_forward(seq, probe_track, geom, KernelKind::kKronecker), upstream);
      },
      delta_tensor, 1e-7);
  for (std::size_t i = 0; i < t; ++i) CHECK(fd_delta[i] == 0.0);
}

TEST_CASE("pooled fallback backward spreads the upstream gradient uniformly") {
  FeatureSequence seq = scalar_frames();
  MagnitudeTrack flat{{0.0, 0.0, 0.0}};
  BinGeometry geom = make_geometry(flat, 2, BinMode::kStrict);
  SampledSequence out = sample_forward(seq, flat, geom, KernelKind::kLinear);
  REQUIRE(out.assignment.pooled_fallback);

  Tensor upstream({1, 1, 1, 1}, {3.0});
  SampleGrads g = sample_backward(upstream, out, seq, flat, geom, KernelKind::kLinear);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.frames[i] == 1.0);
  for (double v : g.delta) CHECK(v == 0.0);
}

// Randomized structural properties. Each run covers one random instance;
// the loops below give every property several hundred cases.
TEST_CASE("structural properties hold on random instances") {
  std::uint64_t salt = 0;
  for (int rep = 0; rep < 250; ++rep) {
    SeededRng rng(SeededRng::derive(7400, salt++));
    const std::size_t t = 1 + rng.next_u64() % 20;
    const std::size_t bins = 1 + rng.next_u64() % 10;
    const BinMode mode = rng.next_u64() % 2 ? BinMode::kStrict : BinMode::kCentered;
    FeatureSequence seq = random_frames(t, 2, 2, 2, rng);
    MagnitudeTrack track = random_track(t, rng);
    BinGeometry geom = make_geometry(track, bins, mode);

    SampledSequence lin = sample_forward(seq, track, geom, KernelKind::kLinear);
    SampledSequence kro = sample_forward(seq, track, geom, KernelKind::kKronecker);

    // Disjoint supports: a frame contributes to at most one bin.
    std::vector<int> seen(t, 0);
    for (const WeightEntry& e : lin.assignment.entries) seen[e.frame]++;
    for (int count : seen) CHECK(count <= 1);

    // The kronecker kernel stores pure averaging weights.
    for (const WeightEntry& e : kro.assignment.entries) {
      const std::size_t slot = static_cast<std::size_t>(
          std::lower_bound(kro.surviving_bins.begin(), kro.surviving_bins.end(), e.bin) -
          kro.surviving_bins.begin());
      CHECK(e.weight * static_cast<double>(kro.assignment.bin_counts[slot]) == 1.0);
    }

    // Resolution bounds.
    CHECK(lin.bin_prime() >= 1);
    CHECK(lin.bin_prime() <= std::min(bins, t));
    CHECK(kro.bin_prime() <= std::min(bins, t));

    // Bin counts tally the entries.
    CHECK(std::accumulate(lin.assignment.bin_counts.begin(), lin.assignment.bin_counts.end(),
                          std::size_t{0}) == lin.assignment.entries.size());
  }
}

TEST_CASE("permuting frames permutes nothing but the assignment") {
  std::uint64_t salt = 0;
  for (int rep = 0; rep < 250; ++rep) {
    SeededRng rng(SeededRng::derive(7500, salt++));
    const std::size_t t = 2 + rng.next_u64() % 12;
    const std::size_t bins = 1 + rng.next_u64() % 8;
    const BinMode mode = rng.next_u64() % 2 ? BinMode::kStrict : BinMode::kCentered;
    const KernelKind kind = rng.next_u64() % 2 ? KernelKind::kLinear : KernelKind::kKronecker;
    FeatureSequence seq = random_frames(t, 1, 2, 2, rng);
    MagnitudeTrack track = random_track(t, rng);
    BinGeometry geom = make_geometry(track, bins, mode);

    std::vector<std::size_t> perm(t);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = t; i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    }

    FeatureSequence permuted(t, 1, 2, 2);
    MagnitudeTrack permuted_track;
    permuted_track.delta.resize(t);
    for (std::size_t i = 0; i < t; ++i) {
      auto dst = permuted.frame(i);
      auto src = seq.frame(perm[i]);
      std::copy(src.begin(), src.end(), dst.begin());
      permuted_track.delta[i] = track.delta[perm[i]];
    }
    // Permutation leaves the max unchanged, so the geometry is identical.
    BinGeometry geom2 = make_geometry(permuted_track, bins, mode);
    REQUIRE(geom2.gamma == geom.gamma);

    SampledSequence base = sample_forward(seq, track, geom, kind);
    SampledSequence shuffled = sample_forward(permuted, permuted_track, geom2, kind);

    CHECK(base.surviving_bins == shuffled.surviving_bins);
    CHECK(base.assignment.bin_counts == shuffled.assignment.bin_counts);
    CHECK(max_abs_diff(base.outputs, shuffled.outputs) <= 1e-12);
  }
}
