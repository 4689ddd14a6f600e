#include "relfb/model/checkpoint.hpp"

#include <algorithm>

#include "relfb/numerics/errors.hpp"
#include "relfb/signal/feature_file.hpp"

namespace relfb {
namespace {

constexpr const char* kFormat = "relfb-checkpoint-v1";
constexpr const char* kEmbeddingFile = "embedding.table.rwf";

std::filesystem::path param_file(const std::filesystem::path& dir,
                                 const std::string& name) {
  return dir / (name + ".rwf");
}

void load_into(const std::filesystem::path& path, Tensor& target) {
  const Tensor stored = read_features(path);
  if (stored.size() != target.size()) {
    throw FormatError("checkpoint: " + path.filename().string() + " holds " +
                      std::to_string(stored.size()) + " values, expected " +
                      std::to_string(target.size()));
  }
  std::copy(stored.values().begin(), stored.values().end(),
            target.values().begin());
}

// Feature files hold matrices; higher-rank tensors are stored as
// [dim0, rest] and restored by size.
Tensor as_matrix(const Tensor& t) {
  if (t.rank() <= 2) return t;
  return t.reshaped(Shape{t.dim(0), t.size() / t.dim(0)});
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, FullModel& model,
                     std::uint64_t step, const std::string& run_config_json) {
  std::filesystem::create_directories(dir);
  for (Parameter* p : model.parameters()) {
    write_features(param_file(dir, p->name()), as_matrix(p->value()),
                   FeatureDType::kFloat64);
  }
  const BatchNormState& bn = model.batch_norm_state();
  write_features(dir / "batch_norm.running_mean.rwf", bn.running_mean,
                 FeatureDType::kFloat64);
  write_features(dir / "batch_norm.running_var.rwf", bn.running_var,
                 FeatureDType::kFloat64);
  Manifest manifest{{"format", kFormat},
                    {"config_hash", config_hash(model.config())},
                    {"seed", std::to_string(model.seed())},
                    {"step", std::to_string(step)},
                    {"model", model_config_to_json(model.config())}};
  if (!run_config_json.empty()) manifest["config"] = run_config_json;
  write_manifest(dir / "manifest.txt", manifest);
}

void restore_parameters(const std::filesystem::path& dir, FullModel& model) {
  const Manifest manifest = read_manifest(dir / "manifest.txt");
  if (manifest_value(manifest, "config_hash") != config_hash(model.config())) {
    throw FormatError("checkpoint: config hash " +
                      manifest_value(manifest, "config_hash") +
                      " does not match the model (" + config_hash(model.config()) +
                      ")");
  }
  if (!model.has_embedding() && std::filesystem::exists(dir / kEmbeddingFile)) {
    model.set_embedding(EmbeddingNet(read_features(dir / kEmbeddingFile)));
  }
  for (Parameter* p : model.parameters()) {
    load_into(param_file(dir, p->name()), p->value());
  }
  BatchNormState& bn = model.batch_norm_state();
  load_into(dir / "batch_norm.running_mean.rwf", bn.running_mean);
  load_into(dir / "batch_norm.running_var.rwf", bn.running_var);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  Manifest manifest = read_manifest(dir / "manifest.txt");
  if (manifest_value(manifest, "format") != kFormat) {
    throw FormatError("checkpoint: unknown format '" +
                      manifest_value(manifest, "format") + "'");
  }
  const ModelConfig config = model_config_from_json(manifest_value(manifest, "model"));
  const std::uint64_t seed = std::stoull(manifest_value(manifest, "seed"));
  const std::uint64_t step = std::stoull(manifest_value(manifest, "step"));
  FullModel model(config, seed);
  restore_parameters(dir, model);
  return LoadedCheckpoint{std::move(model), std::move(manifest), step};
}

}  // namespace relfb
