#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "relfb/numerics/autodiff.hpp"
#include "relfb/numerics/layers.hpp"

namespace relfb {

struct BackendConfig {
  std::size_t conv_layers = 2;
  std::size_t channels = 32;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t pool_h = 2;
  std::size_t pool_w = 2;
  std::vector<std::size_t> dense{256, 256};
};

/// Conv -> sigmoid -> max-pool blocks, then sigmoid dense layers and a
/// softmax output over V. Parameter group "backend".
class Backend {
 public:
  /// input: [K,F',T'] shape of q for one example.
  Backend(const BackendConfig& config, const Shape& input, std::size_t vocab,
          std::uint64_t seed);

  const BackendConfig& config() const noexcept { return config_; }
  const Shape& input_shape() const noexcept { return input_; }
  std::size_t vocab() const noexcept { return vocab_; }

  /// Posterior [V] for q [K,F',T'].
  Var forward(const Var& q) const;

  std::vector<Parameter*> parameters();

 private:
  struct ConvLayer {
    Parameter kernels;  // [C_out, C_in, kh, kw]
    Parameter bias;     // [C_out]
  };

  BackendConfig config_;
  Shape input_;
  std::size_t vocab_;
  std::vector<ConvLayer> conv_;
  std::vector<Dense> dense_;
  std::optional<Dense> output_;
};

Var backend_forward(const Var& q, const Backend& backend);

}  // namespace relfb
