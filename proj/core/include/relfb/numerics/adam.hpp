#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relfb/numerics/autodiff.hpp"

namespace relfb {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moments are keyed by parameter name and created
/// lazily (all zeros) the first time a parameter is stepped.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Updates every trainable parameter in place from its accumulated grad.
  void step(const std::vector<Parameter*>& params);

  std::uint64_t step_count() const noexcept { return step_count_; }
  const AdamConfig& config() const noexcept { return config_; }

  struct Moments {
    Tensor m;
    Tensor v;
  };
  /// nullptr if the parameter has never been stepped.
  const Moments* moments(const std::string& name) const;

 private:
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace relfb
