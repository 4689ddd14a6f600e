#include "relfb/signal/framing.hpp"

#include <algorithm>
#include <string>

#include "relfb/numerics/errors.hpp"

namespace relfb {

void FramingConfig::validate() const {
  if (shift == 0) throw ConfigError("shift", "must be positive");
  if (frame_length <= shift) {
    throw ConfigError("S", "frame length must exceed the shift");
  }
  if (context % 2 == 0) throw ConfigError("T", "context must be odd");
}

std::size_t frame_count(std::size_t length, std::size_t frame_length,
                        std::size_t shift) {
  if (length < frame_length) return 0;
  return (length - frame_length) / shift + 1;
}

Tensor frame_signal(std::span<const double> samples, const FramingConfig& config) {
  config.validate();
  const std::size_t s = config.frame_length;
  if (samples.size() < s) {
    throw DimensionError("frame_signal: signal of " +
                         std::to_string(samples.size()) +
                         " samples is shorter than one frame of " +
                         std::to_string(s));
  }
  const std::size_t n = frame_count(samples.size(), s, config.shift);
  Tensor frames(Shape{n, s});
  for (std::size_t j = 0; j < n; ++j) {
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(j * config.shift),
                s, frames.data() + j * s);
  }
  return frames;
}

std::size_t block_frame_index(std::size_t center, std::size_t row,
                              std::size_t context, std::size_t frame_total) {
  const auto half = static_cast<std::ptrdiff_t>((context - 1) / 2);
  const std::ptrdiff_t idx =
      static_cast<std::ptrdiff_t>(center) + static_cast<std::ptrdiff_t>(row) - half;
  return static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(frame_total) - 1));
}

Tensor assemble_block(const Tensor& frames, std::size_t center,
                      std::size_t context) {
  if (frames.rank() != 2) {
    throw DimensionError("assemble_block: frames must be [N,S], got " +
                         shape_string(frames.shape()));
  }
  const std::size_t n = frames.dim(0);
  const std::size_t s = frames.dim(1);
  if (center >= n) {
    throw DimensionError("assemble_block: center " + std::to_string(center) +
                         " outside " + std::to_string(n) + " frames");
  }
  Tensor block(Shape{context, s});
  for (std::size_t row = 0; row < context; ++row) {
    const std::size_t src = block_frame_index(center, row, context, n);
    std::copy_n(frames.data() + src * s, s, block.data() + row * s);
  }
  return block;
}

}  // namespace relfb
