#include "relfb/model/backend.hpp"

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

Backend::Backend(const BackendConfig& config, const Shape& input,
                 std::size_t vocab, std::uint64_t seed)
    : config_(config), input_(input), vocab_(vocab) {
  if (input.size() != 3) {
    throw DimensionError("backend: input must be [K,F',T'], got " +
                         shape_string(input));
  }
  if (vocab < 2) throw ConfigError("vocab", "need at least two senones");
  if (config.dense.empty()) throw ConfigError("dense", "need at least one dense layer");
  Rng rng = Rng::substream(seed, "init:backend");

  std::size_t channels = input[0];
  std::size_t h = input[1];
  std::size_t w = input[2];
  for (std::size_t i = 0; i < config.conv_layers; ++i) {
    if (config.channels == 0 || config.kernel_h == 0 || config.kernel_w == 0 ||
        config.pool_h == 0 || config.pool_w == 0) {
      throw ConfigError("conv", "channels, kernel and pool must be positive");
    }
    if (config.kernel_h > h || config.kernel_w > w) {
      throw ConfigError("conv", "layer " + std::to_string(i) + " kernel exceeds " +
                                    std::to_string(h) + "x" + std::to_string(w) +
                                    " input");
    }
    h = h - config.kernel_h + 1;
    w = w - config.kernel_w + 1;
    if (config.pool_h > h || config.pool_w > w) {
      throw ConfigError("conv", "layer " + std::to_string(i) +
                                    " pooling window exceeds its input");
    }
    h /= config.pool_h;
    w /= config.pool_w;
    const std::size_t fan_in = channels * config.kernel_h * config.kernel_w;
    const std::size_t fan_out = config.channels * config.kernel_h * config.kernel_w;
    const std::string name = "backend.conv" + std::to_string(i);
    conv_.push_back(ConvLayer{
        Parameter(name + ".kernels", "backend",
                  xavier_normal(Shape{config.channels, channels, config.kernel_h,
                                      config.kernel_w},
                                fan_in, fan_out, rng)),
        Parameter(name + ".bias", "backend", Tensor(Shape{config.channels}, 0.0))});
    channels = config.channels;
  }

  std::size_t width = channels * h * w;
  for (std::size_t i = 0; i < config.dense.size(); ++i) {
    if (config.dense[i] == 0) throw ConfigError("dense", "layer widths must be positive");
    dense_.emplace_back("backend.dense" + std::to_string(i), "backend", width,
                        config.dense[i], rng);
    width = config.dense[i];
  }
  output_.emplace("backend.output", "backend", width, vocab, rng, Init::kZero);
}

Var Backend::forward(const Var& q) const {
  if (q.shape() != input_) {
    throw DimensionError("backend: expected q " + shape_string(input_) + ", got " +
                         shape_string(q.shape()));
  }
  Var h = q;
  for (const ConvLayer& layer : conv_) {
    h = sigmoid(add_rows(correlate2d_valid(h, layer.kernels.var()),
                         layer.bias.var()));
    h = maxpool2d(h, config_.pool_h, config_.pool_w);
  }
  h = reshape(h, Shape{h.size()});
  for (const Dense& layer : dense_) h = sigmoid(layer.forward(h));
  return softmax(output_->forward(h));
}

std::vector<Parameter*> Backend::parameters() {
  std::vector<Parameter*> out;
  for (ConvLayer& layer : conv_) {
    out.push_back(&layer.kernels);
    out.push_back(&layer.bias);
  }
  for (Dense& layer : dense_) layer.collect(out);
  output_->collect(out);
  return out;
}

Var backend_forward(const Var& q, const Backend& backend) {
  return backend.forward(q);
}

}  // namespace relfb
