#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relfb/model/model.hpp"
#include "relfb/training/config.hpp"
#include "relfb/training/dataset.hpp"

namespace relfb {

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_loss = 0.0;
  double eval_acc = 0.0;
  bool has_eval = false;
  double seconds = 0.0;
};

/// One row per epoch. Wall time is kept apart from the metrics so that the
/// metrics CSV is reproducible byte for byte.
class MetricsLog {
 public:
  void append(const EpochMetrics& row) { rows_.push_back(row); }
  const std::vector<EpochMetrics>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  const EpochMetrics& last() const { return rows_.back(); }

  /// Header `epoch,train_loss,train_acc,eval_loss,eval_acc`; values %.17g,
  /// eval columns empty when no eval set was given.
  std::string csv() const;
  /// Header `epoch,seconds`.
  std::string timing_csv() const;
  /// metrics.csv and timing.csv inside `dir`.
  void write(const std::filesystem::path& dir) const;

 private:
  std::vector<EpochMetrics> rows_;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t frames = 0;
};

/// Source of the previous-frame feedback in free-running mode.
enum class FeedbackSource { kModelPosterior, kGroundTruthOneHot };

/// Posterior per frame, frames in time order. Teacher-forced mode feeds the
/// embedding of the true label at t-1; free-running mode feeds the
/// embedding of the previous posterior. Feedback is zero at t = 0.
std::vector<Tensor> utterance_posteriors(
    FullModel& model, const PreparedUtterance& utterance, EvalMode mode,
    FeedbackSource feedback = FeedbackSource::kModelPosterior,
    Pipeline pipeline = Pipeline::kFull);

/// Block x [F,T] around `center` cut from an utterance spectrogram [F,N],
/// replicating edge frames like assemble_block.
Var spectrogram_block(const Tensor& spectrogram, std::size_t center,
                      std::size_t context);

/// Mean cross-entropy and frame accuracy over every frame (eval-mode batch
/// norm). Free-running evaluation of a model without embedding feedback is
/// legal; e_prev is simply unused.
EvalResult evaluate(FullModel& model, const Dataset& data, EvalMode mode,
                    FeedbackSource feedback = FeedbackSource::kModelPosterior,
                    Pipeline pipeline = Pipeline::kFull);

/// Marks the parameters of each group non-trainable; "batch_norm" stops the
/// running-statistics update.
void apply_freeze(FullModel& model, const std::vector<std::string>& groups);

/// Fresh model for `target` with the listed groups copied from `source`.
/// Throws ConfigError if the filterbanks differ in family, F or L.
FullModel transfer_filters(const FullModel& source, const TrainConfig& target);

struct TrainInputs {
  const Dataset* train = nullptr;
  const Dataset* eval = nullptr;
  const EmbeddingNet* embedding = nullptr;
  const FullModel* transfer_source = nullptr;
};

struct TrainResult {
  FullModel model;
  MetricsLog log;
  std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Teacher-forced mini-batch training with Adam. Block order comes from the
/// "shuffle" substream of config.seed; a trailing batch of one block is
/// dropped. Throws ConfigError when the model needs an embedding and none
/// is supplied.
TrainResult train(const TrainConfig& config, const TrainInputs& inputs,
                  const EpochCallback& on_epoch = {});

/// Embedding for a config: loaded from its checkpoint, or pre-trained on the
/// training labels when requested. Empty when the model does not need one.
std::optional<EmbeddingNet> resolve_embedding(const TrainConfig& config,
                                              const Dataset& train_data);

/// Loads data, embedding and transfer source named in the config and trains.
TrainResult run_training(const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

struct PlanRow {
  std::string name;
  TrainConfig config;
};

/// Named training runs. A row whose transfer.source names an earlier row
/// starts from that row's trained model.
struct ExperimentPlan {
  std::vector<PlanRow> rows;

  /// Throws ConfigError on duplicate names.
  void validate() const;
};

/// The nine standard ablation rows: (A,M); A-R,M and A-R,M-R, each with
/// softmax/sigmoid gates and without/with embedding feedback.
ExperimentPlan standard_ablation_plan(const TrainConfig& base);

/// {"base": <config>, "rows": "standard" | [{"name": ..., "overrides": {...}}]}
ExperimentPlan experiment_plan_from_json(std::string_view text);

struct AblationRow {
  std::string name;
  EpochMetrics final;
};

std::vector<AblationRow> run_ablation_suite(
    const ExperimentPlan& plan,
    const std::function<void(const std::string&)>& on_row_start = {});

/// Aligned plain-text table, one line per row plus a header.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace relfb
