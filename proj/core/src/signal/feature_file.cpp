#include "relfb/signal/feature_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "relfb/numerics/errors.hpp"

namespace relfb {
namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(p[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void write_features(const std::filesystem::path& path, const Tensor& matrix,
                    FeatureDType dtype) {
  std::size_t rows = 1;
  std::size_t cols = matrix.size();
  if (matrix.rank() == 2) {
    rows = matrix.dim(0);
    cols = matrix.dim(1);
  } else if (matrix.rank() > 2) {
    throw DimensionError("write_features: expected a matrix, got " +
                         shape_string(matrix.shape()));
  }
  std::string out = "RWF1";
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
  for (double v : matrix.values()) {
    if (dtype == FeatureDType::kFloat32) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot write feature file " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Tensor read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open feature file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = path.string() + ": ";
  if (bytes.size() < kFeatureHeaderBytes || std::memcmp(data, "RWF1", 4) != 0) {
    throw FormatError(where + "magic: expected RWF1");
  }
  const auto rows = get_le<std::uint32_t>(data + 4);
  const auto cols = get_le<std::uint32_t>(data + 8);
  const auto tag = get_le<std::uint32_t>(data + 12);
  std::size_t width = 0;
  if (tag == static_cast<std::uint32_t>(FeatureDType::kFloat32)) {
    width = 4;
  } else if (tag == static_cast<std::uint32_t>(FeatureDType::kFloat64)) {
    width = 8;
  } else {
    throw FormatError(where + "dtype: unsupported tag " + std::to_string(tag));
  }
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != kFeatureHeaderBytes + count * width) {
    throw FormatError(where + "payload: expected " +
                      std::to_string(count * width) + " bytes");
  }
  Tensor out(Shape{rows, cols});
  const unsigned char* p = data + kFeatureHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 4) {
      out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
    } else {
      out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
    }
  }
  return out;
}

}  // namespace relfb
