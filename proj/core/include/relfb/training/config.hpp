#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relfb/embedding/embedding.hpp"
#include "relfb/model/model.hpp"
#include "relfb/numerics/adam.hpp"
#include "relfb/signal/synth.hpp"

namespace relfb {

enum class EvalMode { kTeacherForced, kFreeRunning };

std::string_view to_string(EvalMode mode);  // "teacher" / "free"
EvalMode eval_mode_from_string(std::string_view name);

/// Either a directory written by `write_utterance_dir` or a synthetic spec
/// generated on the fly with `seed`.
struct DataSource {
  std::string path;
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t seed = 1;

  bool empty() const noexcept { return path.empty() && !synthetic; }
};

/// Where the senone embedding comes from when the model needs one.
struct EmbeddingSource {
  std::string checkpoint;
  /// Pre-train on the training labels when no checkpoint is given.
  bool pretrain = false;
  PretrainConfig pretrain_config;
};

struct TransferSpec {
  /// Source checkpoint directory (or, inside an experiment plan, the name of
  /// an earlier row).
  std::string source;
  std::vector<std::string> groups{"mu"};
  bool freeze = true;
};

struct TrainConfig {
  ModelConfig model;
  DataSource train_data;
  std::optional<DataSource> eval_data;
  AdamConfig optimizer;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  EvalMode eval_mode = EvalMode::kTeacherForced;
  /// Parameter groups held fixed; "batch_norm" freezes the running stats.
  std::vector<std::string> freeze{"embedding"};
  Pipeline pipeline = Pipeline::kFull;
  EmbeddingSource embedding;
  std::optional<TransferSpec> transfer;

  void validate() const;
};

/// Valid names for freeze and transfer group lists.
bool is_known_group(std::string_view group);

TrainConfig train_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Applies an RFC 7386 merge patch to the config's JSON form.
TrainConfig apply_overrides(const TrainConfig& base, std::string_view patch_json);

}  // namespace relfb
