#pragma once

#include <filesystem>
#include <vector>

namespace relfb {

inline constexpr int kPipelineSampleRate = 16000;

struct WaveBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = kPipelineSampleRate;
};

/// Reads RIFF PCM16 mono 16 kHz. Samples are scaled by 1/32768.
/// Throws FormatError naming the offending header field otherwise.
WaveBuffer read_wav(const std::filesystem::path& path);

/// Writes RIFF PCM16 mono. Samples are scaled by 32768, rounded and clipped.
void write_wav(const std::filesystem::path& path, const WaveBuffer& wave);

}  // namespace relfb
