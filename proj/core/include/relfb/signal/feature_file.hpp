#pragma once

#include <cstdint>
#include <filesystem>

#include "relfb/numerics/tensor.hpp"

namespace relfb {

/// Feature file layout (all little-endian):
///   "RWF1" | u32 rows | u32 cols | u32 dtype | row-major payload
/// dtype 0 is float32. dtype 1 (float64) is used for checkpoints so that
/// parameters round-trip exactly.
enum class FeatureDType : std::uint32_t { kFloat32 = 0, kFloat64 = 1 };

inline constexpr std::size_t kFeatureHeaderBytes = 16;

/// Writes a rank-2 tensor (rank-0/1 tensors are written as one row).
void write_features(const std::filesystem::path& path, const Tensor& matrix,
                    FeatureDType dtype = FeatureDType::kFloat32);

/// Reads a matrix as [rows, cols] doubles. Throws FormatError on bad magic,
/// unknown dtype or truncated payload.
Tensor read_features(const std::filesystem::path& path);

}  // namespace relfb
