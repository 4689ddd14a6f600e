#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "relfb/model/model.hpp"

namespace relfb {

inline constexpr double kGradCheckThreshold = 1e-4;

/// F=4, L=9, S=32, T=7, K=3 with (3,3) modulation kernels, V=10, d=8 and
/// every relevance and embedding path switched on. The modulation pool is
/// (2,1) because a (3,3) kernel leaves only two frequency rows.
ModelConfig tiny_model_config();

struct ModuleGradReport {
  std::string module;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct ModelGradCheck {
  std::vector<ModuleGradReport> modules;
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

/// Central-difference check of every parameter group of `config` (with a
/// random unfrozen embedding) on a batch of random blocks. Parameters are
/// randomized first so no zero-initialized layer hides an error.
ModelGradCheck model_grad_check(const ModelConfig& config, std::uint64_t seed,
                                bool inject_bug = false,
                                std::size_t max_coords_per_param =
                                    std::numeric_limits<std::size_t>::max());

}  // namespace relfb
