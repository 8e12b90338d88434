#pragma once

#include "sgs/sampler.hpp"

// Serial reference implementation of the sampling operator: a literal loop
// over every (bin, frame) pair, no candidate-bin shortcut, no OpenMP. Kept as
// the oracle for the optimized kernels and as the benchmark baseline. Shares
// only the data types with the optimized path.
namespace sgs::reference {

SampledSequence sample_forward(const FeatureSequence& seq, const MagnitudeTrack& delta,
                               const BinGeometry& geom, KernelKind kind,
                               const SampleOptions& opts = {});

SampledSequence sample_forward_multidim(const FeatureSequence& seq, const Tensor& coords,
                                        const MultiDimGeometry& geom, KernelKind kind,
                                        const SampleOptions& opts = {});

SampleGrads sample_backward(const Tensor& out_grad, const SampledSequence& sampled,
                            const FeatureSequence& seq, const MagnitudeTrack& delta,
                            const BinGeometry& geom, KernelKind kind);

}  // namespace sgs::reference
