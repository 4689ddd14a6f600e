#include "relfb/model/model.hpp"

#include <algorithm>

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {
namespace {

std::size_t feedback_dim(const ModelConfig& config) {
  return config.flags.use_embedding ? config.embed_dim : 0;
}

}  // namespace

std::string_view to_string(Pipeline pipeline) {
  return pipeline == Pipeline::kFull ? "full" : "baseline";
}

Pipeline pipeline_from_string(std::string_view name) {
  if (name == "full") return Pipeline::kFull;
  if (name == "baseline") return Pipeline::kBaseline;
  throw ConfigError("pipeline", "expected full or baseline, got '" +
                                    std::string(name) + "'");
}

FullModel::FullModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      frontend_(config.frontend, feedback_dim(config), seed),
      modulation_(config.modulation, config.frontend.F, config.frontend.T,
                  feedback_dim(config), seed),
      backend_(config.backend, modulation_.map_shape(), config.vocab, seed) {
  if (config.flags.use_embedding && config.embed_dim == 0) {
    throw ConfigError("embed_dim", "must be positive when use_embedding is on");
  }
}

void FullModel::set_embedding(const EmbeddingNet& net) {
  if (net.vocab() != config_.vocab || net.dim() != config_.embed_dim) {
    throw DimensionError("set_embedding: table [" + std::to_string(net.vocab()) +
                         "," + std::to_string(net.dim()) + "] but model expects [" +
                         std::to_string(config_.vocab) + "," +
                         std::to_string(config_.embed_dim) + "]");
  }
  const bool trainable = embedding_ ? embedding_->table().trainable() : true;
  embedding_.emplace(net.table().value());
  embedding_->table().set_trainable(trainable);
}

Var FullModel::zero_feedback() const {
  if (!config_.uses_embedding()) return Var{};
  return Var::constant(Tensor(Shape{config_.embed_dim}, 0.0));
}

Var FullModel::label_feedback(std::size_t senone) const {
  if (!config_.uses_embedding()) return Var{};
  if (!embedding_) {
    throw ConfigError("embedding_checkpoint",
                      "model uses embedding feedback but no embedding is loaded");
  }
  return embed_onehot(senone, *embedding_);
}

Var FullModel::posterior_feedback(const Tensor& posterior) const {
  if (!config_.uses_embedding()) return Var{};
  if (!embedding_) {
    throw ConfigError("embedding_checkpoint",
                      "model uses embedding feedback but no embedding is loaded");
  }
  return embed_posterior(Var::constant(posterior), *embedding_);
}

Var FullModel::spectrogram(const Tensor& block) const {
  return frontend_.spectrogram(block);
}

std::vector<ModelTrace> FullModel::forward_batch(std::span<const Var> x,
                                                 std::span<const Var> e_prev,
                                                 BatchNormMode mode,
                                                 Pipeline pipeline) {
  if (x.empty()) throw DimensionError("forward_batch: empty batch");
  if (pipeline == Pipeline::kFull && e_prev.size() != x.size()) {
    throw DimensionError("forward_batch: " + std::to_string(x.size()) +
                         " inputs but " + std::to_string(e_prev.size()) +
                         " feedback vectors");
  }
  const AblationFlags& flags = config_.flags;
  std::vector<ModelTrace> traces(x.size());
  std::vector<Var> maps, gates;
  maps.reserve(x.size());
  gates.reserve(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) {
    ModelTrace& tr = traces[b];
    if (pipeline == Pipeline::kFull) {
      tr.acoustic = frontend_.forward_from_spectrogram(x[b], e_prev[b],
                                                       flags.acoustic_relevance);
      tr.modulation = modulation_.forward(tr.acoustic.z, e_prev[b],
                                          flags.modulation_relevance);
      gates.push_back(tr.modulation.w_m);
    } else {
      tr.acoustic.x = x[b];
      tr.acoustic.z = frontend_.baseline(x[b]);
      tr.modulation.raw = modulation_filter(tr.acoustic.z, modulation_.kernels().var());
      tr.modulation.p = pool_maps(tr.modulation.raw, modulation_.config().pool_f,
                                  modulation_.config().pool_t);
    }
    maps.push_back(tr.modulation.p);
  }
  const Var q = pipeline == Pipeline::kFull
                    ? modulation_.normalize(maps, gates, mode)
                    : modulation_.normalize_baseline(maps, mode);
  for (std::size_t b = 0; b < x.size(); ++b) {
    traces[b].q = select(q, b);
    traces[b].posterior = backend_.forward(traces[b].q);
  }
  return traces;
}

ModelTrace FullModel::forward(const Var& x, const Var& e_prev, Pipeline pipeline) {
  return std::move(forward_batch(std::span<const Var>(&x, 1),
                                 std::span<const Var>(&e_prev, 1),
                                 BatchNormMode::kEval, pipeline)
                       .front());
}

std::vector<Parameter*> FullModel::parameters() {
  std::vector<Parameter*> out = frontend_.parameters();
  for (Parameter* p : modulation_.parameters()) out.push_back(p);
  for (Parameter* p : backend_.parameters()) out.push_back(p);
  if (embedding_) out.push_back(&embedding_->table());
  return out;
}

std::vector<Parameter*> FullModel::parameters_in_group(std::string_view group) {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters()) {
    if (p->group() == group) out.push_back(p);
  }
  return out;
}

Parameter* FullModel::find_parameter(std::string_view name) {
  for (Parameter* p : parameters()) {
    if (p->name() == name) return p;
  }
  return nullptr;
}

const Parameter* FullModel::find_parameter(std::string_view name) const {
  return const_cast<FullModel*>(this)->find_parameter(name);
}

void FullModel::post_step() { frontend_.bank().clamp(); }

void FullModel::randomize_parameters(std::uint64_t seed, double scale) {
  Rng rng = Rng::substream(seed, "randomize");
  for (Parameter* p : parameters()) {
    if (p->group() == "mu") {
      for (double& v : p->value().values()) v *= rng.uniform(0.8, 1.2);
      continue;
    }
    for (double& v : p->value().values()) v = rng.normal(0.0, scale);
  }
  post_step();
}

Var model_forward(const Tensor& block, const Var& e_prev, FullModel& model) {
  return model.forward(model.spectrogram(block), e_prev).posterior;
}

}  // namespace relfb
