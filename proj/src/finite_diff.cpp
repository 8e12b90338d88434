#include "sgs/finite_diff.hpp"

#include <cmath>
#include <sstream>

namespace sgs {

Tensor finite_diff(const ScalarFn& fn, const Tensor& at, double eps_base) {
  Tensor grad(at.shape());
  Tensor probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x = at[i];
    const double eps = eps_base * std::max(1.0, std::fabs(x));

    probe[i] = x + eps;
    const double plus = fn(probe);
    probe[i] = x - eps;
    const double minus = fn(probe);
    probe[i] = x;

    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      std::ostringstream msg;
      msg << "non-finite probe value at coordinate " << i;
      throw NumericError(msg.str());
    }
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

}  // namespace sgs
