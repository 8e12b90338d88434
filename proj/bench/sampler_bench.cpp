#include <benchmark/benchmark.h>

#include "sgs/reference_sampler.hpp"
#include "sgs/rng.hpp"
#include "sgs/sampler.hpp"

namespace {

// Shared problem setup: T frames of 16 x 14 x 14, 16 bins, linear kernel.
struct Problem {
  sgs::FeatureSequence seq;
  sgs::MagnitudeTrack delta;
  sgs::BinGeometry geom;
  sgs::SampledSequence sampled;
  sgs::Tensor upstream;
};

Problem make_problem(std::size_t t_len) {
  sgs::SeededRng rng(7);
  sgs::FeatureSequence seq(t_len, 16, 14, 14);
  rng.fill_normal(seq.frames().values());

  sgs::MagnitudeTrack delta;
  delta.delta.resize(t_len);
  for (double& d : delta.delta) d = rng.uniform(0.0, 1.0);

  Problem p{std::move(seq), std::move(delta), {}, {}, {}};
  p.geom = sgs::make_geometry(p.delta, 16, sgs::BinMode::kCentered);
  p.sampled = sgs::sample_forward(p.seq, p.delta, p.geom, sgs::KernelKind::kLinear);
  p.upstream = sgs::Tensor(p.sampled.outputs.shape());
  rng.fill_normal(p.upstream.values());
  return p;
}

void bm_forward_parallel(benchmark::State& state) {
  const Problem p = make_problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sgs::sample_forward(p.seq, p.delta, p.geom, sgs::KernelKind::kLinear));
  }
}

void bm_forward_reference(benchmark::State& state) {
  const Problem p = make_problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sgs::reference::sample_forward(p.seq, p.delta, p.geom, sgs::KernelKind::kLinear));
  }
}

void bm_backward_parallel(benchmark::State& state) {
  const Problem p = make_problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sgs::sample_backward(p.upstream, p.sampled, p.seq, p.delta, p.geom,
                                                  sgs::KernelKind::kLinear));
  }
}

void bm_backward_reference(benchmark::State& state) {
  const Problem p = make_problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sgs::reference::sample_backward(
        p.upstream, p.sampled, p.seq, p.delta, p.geom, sgs::KernelKind::kLinear));
  }
}

}  // namespace

BENCHMARK(bm_forward_parallel)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bm_forward_reference)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bm_backward_parallel)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bm_backward_reference)->Arg(16)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
