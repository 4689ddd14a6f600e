#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "relfb/numerics/rng.hpp"
#include "relfb/numerics/tensor.hpp"
#include "relfb/training/config.hpp"

namespace relfb::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  // Per-process suffix: ctest runs each test case in its own process.
  const auto dir = std::filesystem::temp_directory_path() /
                   ("relfb_test_" + name + "_" + std::to_string(::getpid()));
  struct Cleanup {
    std::vector<std::filesystem::path> dirs;
    ~Cleanup() {
      std::error_code ec;
      for (const auto& d : dirs) std::filesystem::remove_all(d, ec);
    }
  };
  static Cleanup cleanup;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  cleanup.dirs.push_back(dir);
  return dir;
}

/// Small model and synthetic data that train in well under a second.
inline TrainConfig small_train_config() {
  TrainConfig c;
  auto& fe = c.model.frontend;
  fe.F = 8;
  fe.L = 17;
  fe.S = 64;
  fe.shift = 32;
  fe.T = 5;
  fe.embed_proj_dim = 4;
  fe.relevance_hidden = 6;
  auto& mod = c.model.modulation;
  mod.K = 3;
  mod.kf = 3;
  mod.kt = 3;
  mod.pool_f = 2;
  mod.pool_t = 1;
  mod.embed_proj_dim = 4;
  mod.relevance_hidden = 6;
  c.model.backend.conv_layers = 0;
  c.model.backend.dense = {12};
  c.model.vocab = 4;
  c.model.embed_dim = 6;

  SyntheticSpec spec;
  spec.classes = 4;
  spec.peaks_hz = {{500.0}, {1500.0}, {3000.0}, {5500.0}};
  spec.snr_db_min = 10.0;
  spec.snr_db_max = 20.0;
  spec.min_frames = 20;
  spec.max_frames = 20;
  spec.utterances = 6;
  spec.transition = sticky_transition(4, 0.5);
  spec.frame_length = 64;
  spec.frame_shift = 32;
  c.train_data.synthetic = spec;
  c.train_data.seed = 3;
  DataSource eval = c.train_data;
  eval.synthetic->utterances = 2;
  eval.seed = 4;
  c.eval_data = eval;

  c.optimizer.lr = 1e-2;
  c.batch_size = 16;
  c.epochs = 2;
  c.seed = 5;
  c.embedding.pretrain = true;
  c.embedding.pretrain_config.epochs = 3;
  return c;
}

}  // namespace relfb::test
