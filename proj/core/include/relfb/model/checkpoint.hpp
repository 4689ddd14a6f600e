#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "relfb/model/model.hpp"
#include "relfb/signal/manifest.hpp"

namespace relfb {

/// Checkpoint directory layout:
///   manifest.txt          key=value: format, config_hash, seed, step, model,
///                         and optionally config (the full run config JSON)
///   <parameter>.rwf       one float64 feature file per named parameter
///   batch_norm.running_mean.rwf, batch_norm.running_var.rwf
void save_checkpoint(const std::filesystem::path& dir, FullModel& model,
                     std::uint64_t step, const std::string& run_config_json = "");

struct LoadedCheckpoint {
  FullModel model;
  Manifest manifest;
  std::uint64_t step = 0;
};

/// Rebuilds the model from the stored config and restores every parameter.
/// Throws FormatError on a hash mismatch or a missing/misshapen file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Copies parameter values and batch-norm statistics from a checkpoint into
/// an existing model of the same config.
void restore_parameters(const std::filesystem::path& dir, FullModel& model);

}  // namespace relfb
