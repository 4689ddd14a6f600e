#include "relfb/numerics/adam.hpp"

#include <cmath>

#include "relfb/numerics/errors.hpp"

namespace relfb {

void Adam::step(const std::vector<Parameter*>& params) {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    if (!p->trainable()) continue;
    Tensor& value = p->value();
    const Tensor& grad = p->grad();
    auto [it, inserted] = moments_.try_emplace(p->name());
    Moments& mom = it->second;
    if (inserted) {
      mom.m = Tensor(value.shape(), 0.0);
      mom.v = Tensor(value.shape(), 0.0);
    } else if (mom.m.shape() != value.shape()) {
      throw DimensionError("adam: parameter " + p->name() + " changed shape");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

const Adam::Moments* Adam::moments(const std::string& name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? nullptr : &it->second;
}

}  // namespace relfb
