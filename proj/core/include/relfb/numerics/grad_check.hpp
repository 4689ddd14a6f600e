#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relfb/numerics/autodiff.hpp"

namespace relfb {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates probed per parameter; all of them if the tensor is smaller.
  std::size_t max_coords_per_param = 64;
  /// Denominator floor of the relative error
  /// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
  /// Harness self-test: corrupt the analytic gradient of the first probed
  /// coordinate of every parameter before comparing.
  bool inject_bug = false;
};

struct ParamGradReport {
  std::string name;
  std::string group;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<ParamGradReport> params;
};

double relative_error(double analytic, double numeric, double abs_floor);

/// Compares backward() against central differences of `loss_fn` for each
/// parameter in `params`. `loss_fn` must be deterministic and return a
/// scalar; parameter values are restored afterwards.
GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& options = {});

}  // namespace relfb
