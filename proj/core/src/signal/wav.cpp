#include "relfb/signal/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "relfb/numerics/errors.hpp"

namespace relfb {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

WaveBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open wav file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  const std::string where = path.string() + ": ";

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0) {
    throw FormatError(where + "riff: missing RIFF header");
  }
  if (std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw FormatError(where + "format: not a WAVE file");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t chunk_size = le32(data + pos + 4);
    const unsigned char* body = data + pos + 8;
    if (pos + 8 + chunk_size > size) {
      throw FormatError(where + "chunk_size: chunk runs past end of file");
    }
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError(where + "fmt: chunk too short");
      const std::uint16_t audio_format = le16(body);
      const std::uint16_t channels = le16(body + 2);
      const std::uint32_t rate = le32(body + 4);
      const std::uint16_t bits = le16(body + 14);
      if (audio_format != 1) {
        throw FormatError(where + "audio_format: expected PCM (1), got " +
                          std::to_string(audio_format));
      }
      if (channels != 1) {
        throw FormatError(where + "channels: expected 1, got " +
                          std::to_string(channels));
      }
      if (rate != static_cast<std::uint32_t>(kPipelineSampleRate)) {
        throw FormatError(where + "sample_rate: expected 16000, got " +
                          std::to_string(rate));
      }
      if (bits != 16) {
        throw FormatError(where + "bits_per_sample: expected 16, got " +
                          std::to_string(bits));
      }
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(where + "fmt: data chunk before fmt chunk");
      WaveBuffer wave;
      wave.sample_rate = kPipelineSampleRate;
      wave.samples.resize(chunk_size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(le16(body + 2 * i));
        wave.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return wave;
    }
    pos += 8 + chunk_size + (chunk_size & 1U);
  }
  throw FormatError(where + "data: no data chunk");
}

void write_wav(const std::filesystem::path& path, const WaveBuffer& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::string out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double s : wave.samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot write wav file " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace relfb
