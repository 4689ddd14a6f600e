#include "relfb/frontend/acoustic.hpp"

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

std::string_view to_string(RelevanceOutput output) {
  return output == RelevanceOutput::kSigmoid ? "sigmoid" : "softmax";
}

RelevanceOutput relevance_output_from_string(std::string_view name) {
  if (name == "sigmoid") return RelevanceOutput::kSigmoid;
  if (name == "softmax") return RelevanceOutput::kSoftmax;
  throw ConfigError("relevance_output",
                    "expected sigmoid or softmax, got '" + std::string(name) + "'");
}

Var relevance_activation(const Var& scores, RelevanceOutput output) {
  return output == RelevanceOutput::kSigmoid ? sigmoid(scores) : softmax(scores);
}

void FrontendConfig::validate() const {
  if (F == 0) throw ConfigError("F", "must be positive");
  if (L < 3 || L % 2 == 0) throw ConfigError("L", "must be odd and >= 3");
  if (S < L) throw ConfigError("S", "frame length is shorter than the kernel");
  if (shift == 0) throw ConfigError("shift", "must be positive");
  if (T == 0 || T % 2 == 0) throw ConfigError("T", "must be odd");
  if (T < 2) throw ConfigError("T", "instance norm needs at least 2 frames");
  if (relevance_hidden == 0) throw ConfigError("relevance_hidden", "must be positive");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor", "must be positive");
}

AcousticRelevanceNet::AcousticRelevanceNet(std::size_t context,
                                           std::size_t embed_dim,
                                           std::size_t proj_dim,
                                           std::size_t hidden,
                                           RelevanceOutput output, Rng& rng)
    : context_(context),
      embed_dim_(embed_dim),
      output_(output),
      proj_(embed_dim > 0 ? std::optional<Dense>(std::in_place,
                                                 "acoustic_relevance.proj",
                                                 "acoustic_relevance", embed_dim,
                                                 proj_dim, rng)
                          : std::nullopt),
      hidden_("acoustic_relevance.hidden", "acoustic_relevance",
              context + (embed_dim > 0 ? proj_dim : 0), hidden, rng),
      out_("acoustic_relevance.out", "acoustic_relevance", hidden, 1, rng,
           Init::kZero) {}

Var AcousticRelevanceNet::scores(const Var& x, const Var& e_prev) const {
  if (x.value().rank() != 2 || x.shape()[1] != context_) {
    throw DimensionError("acoustic_relevance: expected x [F," +
                         std::to_string(context_) + "], got " +
                         shape_string(x.shape()));
  }
  const std::size_t bands = x.shape()[0];
  Var input = x;
  if (proj_) {
    if (!e_prev.defined() || e_prev.value().rank() != 1 ||
        e_prev.size() != embed_dim_) {
      throw DimensionError("acoustic_relevance: expected e_prev [" +
                           std::to_string(embed_dim_) + "]");
    }
    const Var e = tanh(proj_->forward(e_prev));
    input = concat_cols(x, repeat_rows(e, bands));
  }
  const Var h = sigmoid(hidden_.forward(input));
  return reshape(out_.forward(h), Shape{bands});
}

std::vector<Parameter*> AcousticRelevanceNet::parameters() {
  std::vector<Parameter*> out;
  if (proj_) proj_->collect(out);
  hidden_.collect(out);
  out_.collect(out);
  return out;
}

Var compute_spectrogram(const Tensor& block, const Var& kernels,
                        double floor) {
  if (block.rank() != 2) {
    throw DimensionError("compute_spectrogram: block must be [T,S], got " +
                         shape_string(block.shape()));
  }
  const std::size_t L = kernels.shape()[1];
  if (block.dim(1) < L) {
    throw DimensionError("compute_spectrogram: frame length " +
                         std::to_string(block.dim(1)) + " < kernel length " +
                         std::to_string(L));
  }
  // [T,F,O] -> mean over O -> [T,F] -> [F,T].
  const Var responses = correlate1d_valid(Var::constant(block), kernels);
  const Var energy = mean_last(square(responses));
  return transpose(relfb::log_floor(energy, floor));
}

Var acoustic_relevance(const Var& x, const Var& e_prev,
                       const AcousticRelevanceNet& net) {
  return relevance_activation(net.scores(x, e_prev), net.output());
}

Var apply_relevance(const Var& x, const Var& w_a) { return scale_rows(x, w_a); }

AcousticFrontend::AcousticFrontend(const FrontendConfig& config,
                                   std::size_t embed_dim, std::uint64_t seed)
    : config_((config.validate(), config)),
      bank_(config.kernel, config.F, config.L),
      net_([&] {
        Rng rng = Rng::substream(seed, "init:acoustic_relevance");
        return AcousticRelevanceNet(config.T, embed_dim, config.embed_proj_dim,
                                    config.relevance_hidden,
                                    config.relevance_output, rng);
      }()) {
  if (config.norm_affine) {
    gain_.emplace("instance_norm.gain", "instance_norm",
                  Tensor(Shape{config.F}, 1.0));
    offset_.emplace("instance_norm.offset", "instance_norm",
                    Tensor(Shape{config.F}, 0.0));
  }
}

Var AcousticFrontend::spectrogram(const Tensor& block) const {
  if (block.rank() != 2 || block.dim(0) != config_.T ||
      block.dim(1) != config_.S) {
    throw DimensionError("frontend: expected block [" + std::to_string(config_.T) +
                         "," + std::to_string(config_.S) + "], got " +
                         shape_string(block.shape()));
  }
  return compute_spectrogram(block, bank_.kernels(), config_.log_floor);
}

Var AcousticFrontend::spectrogram_frames(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(1) != config_.S) {
    throw DimensionError("frontend: expected frames [N," +
                         std::to_string(config_.S) + "], got " +
                         shape_string(frames.shape()));
  }
  return compute_spectrogram(frames, bank_.kernels(), config_.log_floor);
}

Var AcousticFrontend::normalize(const Var& y) const {
  Var z = instance_norm(y, config_.norm_eps);
  if (gain_) z = add_rows(scale_rows(z, gain_->var()), offset_->var());
  return z;
}

FrontendTrace AcousticFrontend::forward(const Tensor& block, const Var& e_prev,
                                        bool relevance_on) const {
  return forward_from_spectrogram(spectrogram(block), e_prev, relevance_on);
}

FrontendTrace AcousticFrontend::forward_from_spectrogram(const Var& x,
                                                         const Var& e_prev,
                                                         bool relevance_on) const {
  FrontendTrace trace;
  trace.x = x;
  trace.w_a = relevance_on ? acoustic_relevance(x, e_prev, net_)
                           : Var::constant(Tensor(Shape{config_.F}, 1.0));
  trace.y = apply_relevance(x, trace.w_a);
  trace.z = normalize(trace.y);
  return trace;
}

Var AcousticFrontend::baseline(const Var& x) const { return normalize(x); }

std::vector<Parameter*> AcousticFrontend::parameters() {
  std::vector<Parameter*> out;
  if (Parameter* p = bank_.parameter()) out.push_back(p);
  for (Parameter* p : net_.parameters()) out.push_back(p);
  if (gain_) {
    out.push_back(&*gain_);
    out.push_back(&*offset_);
  }
  return out;
}

Var frontend_forward(const Tensor& block, const Var& e_prev,
                     const AcousticFrontend& frontend) {
  return frontend.forward(block, e_prev, true).z;
}

}  // namespace relfb
