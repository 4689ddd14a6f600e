#include "relfb/numerics/layers.hpp"

#include <cmath>

#include "relfb/numerics/ops.hpp"

namespace relfb {

Tensor xavier_normal(Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev =
      std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

Dense::Dense(const std::string& name, const std::string& group, std::size_t in,
             std::size_t out, Rng& rng, Init init)
    : weight_(name + ".weight", group,
              init == Init::kZero ? Tensor(Shape{in, out}, 0.0)
                                  : xavier_normal(Shape{in, out}, in, out, rng)),
      bias_(name + ".bias", group, Tensor(Shape{out}, 0.0)) {}

Var Dense::forward(const Var& x) const {
  return add_bias(matmul(x, weight_.var()), bias_.var());
}

void Dense::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

}  // namespace relfb
