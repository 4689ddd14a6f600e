#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relfb/numerics/autodiff.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

/// Normal(0, sqrt(2 / (fan_in + fan_out))) initial values.
Tensor xavier_normal(Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng& rng);

enum class Init { kXavier, kZero };

/// Affine map x W + b with W [in,out]; x may be [in] or [n,in].
class Dense {
 public:
  Dense(const std::string& name, const std::string& group, std::size_t in,
        std::size_t out, Rng& rng, Init init = Init::kXavier);

  Var forward(const Var& x) const;

  std::size_t in() const { return weight_.value().dim(0); }
  std::size_t out() const { return weight_.value().dim(1); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  void collect(std::vector<Parameter*>& out);

 private:
  Parameter weight_;
  Parameter bias_;
};

}  // namespace relfb
