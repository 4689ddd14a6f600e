#include "relfb/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relfb/numerics/rng.hpp"

namespace relfb {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Var()>& loss_fn,
                           const std::vector<Parameter*>& params,
                           const GradCheckOptions& options) {
  zero_grads(params);
  backward(loss_fn());

  Rng rng = Rng::substream(options.seed, "grad-check");
  GradCheckResult result;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad();
    std::vector<std::size_t> coords(p->value().size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_param) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    ParamGradReport report{p->name(), p->group(), coords.size(), 0.0};
    bool first = true;
    for (std::size_t c : coords) {
      NoGradGuard no_grad;
      double& v = p->value()[c];
      const double saved = v;
      v = saved + options.step;
      const double up = loss_fn().value()[0];
      v = saved - options.step;
      const double down = loss_fn().value()[0];
      v = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      double a = analytic[c];
      if (options.inject_bug && first) a = a * 1.5 + 1e-2;
      first = false;
      report.max_rel_error = std::max(
          report.max_rel_error, relative_error(a, numeric, options.abs_floor));
    }
    result.max_rel_error = std::max(result.max_rel_error, report.max_rel_error);
    result.params.push_back(std::move(report));
  }
  zero_grads(params);
  return result;
}

}  // namespace relfb
