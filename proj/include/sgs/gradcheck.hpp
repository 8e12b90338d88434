#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgs/sampler.hpp"

namespace sgs {

// One analytic-vs-finite-difference comparison. Bin geometry is always
// frozen at its forward value so the finite-difference probes see the same
// stop-gradient semantics as the analytic backward.
struct GradCase {
  enum class Target {
    kEmbed,           // embedding gradients, loss = sum z^2
    kSamplerFrozen,   // frame + delta gradients through the aggregation alone
    kFullFrozen,      // frame + parameter gradients through the whole operator
    kKroneckerDelta,  // kronecker delta-gradient: analytic 0 vs FD 0
  };

  std::string name;
  Target target = Target::kFullFrozen;
  std::size_t t = 4, c = 4, l = 4, b = 4, h = 2, w = 2;
  KernelKind kernel = KernelKind::kLinear;
  BinMode mode = BinMode::kStrict;
  std::uint64_t seed = 0;
};

struct GradCaseResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Random delta coordinates are resampled until every one sits at least
// kink_exclusion * gamma away from the kernel kinks (integer multiples of
// gamma), where the subgradient and the finite difference legitimately
// disagree.
inline constexpr double kKinkExclusion = 1e-3;

std::vector<GradCase> default_gradcheck_cases(std::uint64_t seed);

// JSON list of case objects; unknown fields are errors. See README for the
// schema.
std::vector<GradCase> load_gradcheck_cases(const std::string& path, std::uint64_t seed);

GradCaseResult run_grad_case(const GradCase& c, double tol);

struct GradSuiteResult {
  std::vector<GradCaseResult> cases;
  bool all_pass = false;
};

GradSuiteResult run_grad_suite(const std::vector<GradCase>& cases, double tol);

// Relative error between an analytic and a finite-difference gradient:
// max |a_i - f_i| / max(1, ||f||_inf).
double gradient_rel_err(const Tensor& analytic, const Tensor& fd);

}  // namespace sgs
