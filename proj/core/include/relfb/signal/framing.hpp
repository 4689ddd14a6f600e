#pragma once

#include <cstddef>
#include <span>

#include "relfb/numerics/tensor.hpp"

namespace relfb {

struct FramingConfig {
  std::size_t frame_length = 400;  // S
  std::size_t shift = 160;
  std::size_t context = 101;  // T, odd so the block has a center frame

  /// Throws ConfigError unless S > shift > 0 and T is odd.
  void validate() const;
};

/// floor((length - S) / shift) + 1, or 0 when length < S.
std::size_t frame_count(std::size_t length, std::size_t frame_length,
                        std::size_t shift);

/// N x S matrix of raw (unwindowed) frames; frame j starts at j * shift.
Tensor frame_signal(std::span<const double> samples, const FramingConfig& config);

/// T x S block of frames t-(T-1)/2 .. t+(T-1)/2 from frames [N,S].
/// Indices outside [0, N) replicate the nearest edge frame.
Tensor assemble_block(const Tensor& frames, std::size_t center,
                      std::size_t context);

/// Frame index used for block row `row` around `center` (edge-replicated).
std::size_t block_frame_index(std::size_t center, std::size_t row,
                              std::size_t context, std::size_t frame_total);

}  // namespace relfb
