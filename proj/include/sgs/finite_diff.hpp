#pragma once

#include <functional>

#include "sgs/tensor.hpp"

namespace sgs {

using ScalarFn = std::function<double(const Tensor&)>;

// Central-difference gradient of a scalar function, one probe pair per
// coordinate. Step per coordinate is eps_base * max(1, |x_i|).
// Throws NumericError naming the coordinate if fn returns a non-finite value
// at any probe point.
Tensor finite_diff(const ScalarFn& fn, const Tensor& at, double eps_base = 1e-6);

}  // namespace sgs
