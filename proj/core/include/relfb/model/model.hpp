#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relfb/embedding/embedding.hpp"
#include "relfb/frontend/acoustic.hpp"
#include "relfb/model/backend.hpp"
#include "relfb/modulation/modulation.hpp"

namespace relfb {

struct AblationFlags {
  bool acoustic_relevance = true;
  bool modulation_relevance = true;
  bool use_embedding = true;

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  FrontendConfig frontend;
  ModulationConfig modulation;
  BackendConfig backend;
  AblationFlags flags;
  std::size_t vocab = 8;
  std::size_t embed_dim = 200;

  /// True if some relevance net consumes e_prev.
  bool uses_embedding() const noexcept {
    return flags.use_embedding &&
           (flags.acoustic_relevance || flags.modulation_relevance);
  }
};

/// Canonical JSON text of a model config (stable key order).
std::string model_config_to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw
/// ConfigError naming the field.
ModelConfig model_config_from_json(std::string_view text);
/// 16 hex digits of the FNV-1a hash of the canonical JSON.
std::string config_hash(const ModelConfig& config);

/// Full relevance pipeline, or the same stack with the relevance stages
/// removed entirely.
enum class Pipeline { kFull, kBaseline };

std::string_view to_string(Pipeline pipeline);
Pipeline pipeline_from_string(std::string_view name);

struct ModelTrace {
  FrontendTrace acoustic;
  ModulationTrace modulation;
  Var q;
  Var posterior;
};

inline constexpr std::string_view kParameterGroups[] = {
    "mu",      "acoustic_relevance", "instance_norm", "modulation_kernels",
    "modulation_relevance", "backend", "embedding"};

/// Front-end, modulation stage, backend and (optionally) a senone embedding.
/// The model holds no recurrent state: the feedback embedding is always an
/// explicit argument.
class FullModel {
 public:
  FullModel(const ModelConfig& config, std::uint64_t seed);

  FullModel(FullModel&&) noexcept = default;
  FullModel& operator=(FullModel&&) noexcept = default;

  const ModelConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  AcousticFrontend& frontend() noexcept { return frontend_; }
  const AcousticFrontend& frontend() const noexcept { return frontend_; }
  ModulationFrontend& modulation() noexcept { return modulation_; }
  const ModulationFrontend& modulation() const noexcept { return modulation_; }
  Backend& backend() noexcept { return backend_; }
  const Backend& backend() const noexcept { return backend_; }
  BatchNormState& batch_norm_state() noexcept {
    return modulation_.batch_norm_state();
  }
  const BatchNormState& batch_norm_state() const noexcept {
    return modulation_.batch_norm_state();
  }

  /// Installs a copy of the embedding table (heads are not copied). The
  /// table joins parameter group "embedding".
  void set_embedding(const EmbeddingNet& net);
  bool has_embedding() const noexcept { return embedding_.has_value(); }
  EmbeddingNet* embedding() { return embedding_ ? &*embedding_ : nullptr; }
  const EmbeddingNet* embedding() const {
    return embedding_ ? &*embedding_ : nullptr;
  }

  /// Feedback inputs. All return an undefined Var when no relevance net uses
  /// the embedding; otherwise they need an installed embedding.
  Var zero_feedback() const;
  Var label_feedback(std::size_t senone) const;
  Var posterior_feedback(const Tensor& posterior) const;

  Var spectrogram(const Tensor& block) const;

  /// One pass over a batch of spectrograms x [F,T]. Train mode needs B >= 2.
  std::vector<ModelTrace> forward_batch(std::span<const Var> x,
                                        std::span<const Var> e_prev,
                                        BatchNormMode mode,
                                        Pipeline pipeline = Pipeline::kFull);
  /// Single example in eval mode.
  ModelTrace forward(const Var& x, const Var& e_prev,
                     Pipeline pipeline = Pipeline::kFull);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> parameters_in_group(std::string_view group);
  Parameter* find_parameter(std::string_view name);
  const Parameter* find_parameter(std::string_view name) const;

  /// Clamps the filterbank parameters into range; call after each step.
  void post_step();

  /// Replaces every parameter with random values (filterbank parameters
  /// jittered and clamped) so that no layer is trivially zero.
  void randomize_parameters(std::uint64_t seed, double scale = 0.5);

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  AcousticFrontend frontend_;
  ModulationFrontend modulation_;
  Backend backend_;
  std::optional<EmbeddingNet> embedding_;
};

/// Posterior [V] for one block [T,S] in eval mode.
Var model_forward(const Tensor& block, const Var& e_prev, FullModel& model);

}  // namespace relfb
