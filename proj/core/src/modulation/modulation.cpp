#include "relfb/modulation/modulation.hpp"

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

void ModulationConfig::validate(std::size_t F, std::size_t T) const {
  if (K == 0) throw ConfigError("K", "need at least one modulation kernel");
  if (kf == 0 || kf > F) throw ConfigError("kf", "kernel height must be in [1, F]");
  if (kt == 0 || kt > T) throw ConfigError("kt", "kernel width must be in [1, T]");
  if (pool_f == 0 || pool_t == 0) throw ConfigError("pool", "window must be positive");
  if (F - kf + 1 < pool_f) {
    throw ConfigError("pool", "too few frequency rows (" +
                                  std::to_string(F - kf + 1) +
                                  ") for the pooling window");
  }
  if (T - kt + 1 < pool_t) {
    throw ConfigError("pool", "too few time columns for the pooling window");
  }
  if (relevance_hidden == 0) throw ConfigError("relevance_hidden", "must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) {
    throw ConfigError("bn_momentum", "must lie in [0, 1)");
  }
}

std::size_t ModulationConfig::pooled_rows(std::size_t F) const {
  return (F - kf + 1) / pool_f;
}

std::size_t ModulationConfig::pooled_cols(std::size_t T) const {
  return (T - kt + 1) / pool_t;
}

ModulationRelevanceNet::ModulationRelevanceNet(std::size_t map_size,
                                               std::size_t embed_dim,
                                               std::size_t proj_dim,
                                               std::size_t hidden,
                                               RelevanceOutput output, Rng& rng)
    : map_size_(map_size),
      embed_dim_(embed_dim),
      output_(output),
      proj_(embed_dim > 0 ? std::optional<Dense>(std::in_place,
                                                 "modulation_relevance.proj",
                                                 "modulation_relevance",
                                                 embed_dim, proj_dim, rng)
                          : std::nullopt),
      hidden_("modulation_relevance.hidden", "modulation_relevance",
              map_size + (embed_dim > 0 ? proj_dim : 0), hidden, rng),
      out_("modulation_relevance.out", "modulation_relevance", hidden, 1, rng,
           Init::kZero) {}

Var ModulationRelevanceNet::scores(const Var& p, const Var& e_prev) const {
  if (p.value().rank() != 3 || p.shape()[1] * p.shape()[2] != map_size_) {
    throw DimensionError("modulation_relevance: maps " + shape_string(p.shape()) +
                         " do not flatten to " + std::to_string(map_size_));
  }
  const std::size_t maps = p.shape()[0];
  Var input = reshape(p, Shape{maps, map_size_});
  if (proj_) {
    if (!e_prev.defined() || e_prev.value().rank() != 1 ||
        e_prev.size() != embed_dim_) {
      throw DimensionError("modulation_relevance: expected e_prev [" +
                           std::to_string(embed_dim_) + "]");
    }
    input = concat_cols(input, repeat_rows(proj_->forward(e_prev), maps));
  }
  const Var h = sigmoid(hidden_.forward(input));
  return reshape(out_.forward(h), Shape{maps});
}

std::vector<Parameter*> ModulationRelevanceNet::parameters() {
  std::vector<Parameter*> out;
  if (proj_) proj_->collect(out);
  hidden_.collect(out);
  out_.collect(out);
  return out;
}

Var modulation_filter(const Var& z, const Var& kernels) {
  if (z.value().rank() != 2) {
    throw DimensionError("modulation_filter: z must be [F,T], got " +
                         shape_string(z.shape()));
  }
  const Shape& ks = kernels.shape();
  if (ks.size() != 4 || ks[1] != 1) {
    throw DimensionError("modulation_filter: kernels must be [K,1,kf,kt], got " +
                         shape_string(ks));
  }
  if (ks[2] > z.shape()[0] || ks[3] > z.shape()[1]) {
    throw DimensionError("modulation_filter: kernel " + shape_string(ks) +
                         " larger than input " + shape_string(z.shape()));
  }
  return correlate2d_valid(reshape(z, Shape{1, z.shape()[0], z.shape()[1]}),
                           kernels);
}

Var pool_maps(const Var& raw, std::size_t pool_f, std::size_t pool_t) {
  if (raw.value().rank() == 3 && raw.shape()[1] < pool_f) {
    throw DimensionError("pool_maps: " + std::to_string(raw.shape()[1]) +
                         " frequency rows, window needs " +
                         std::to_string(pool_f));
  }
  return maxpool2d(raw, pool_f, pool_t);
}

Var modulation_relevance(const Var& p, const Var& e_prev,
                         const ModulationRelevanceNet& net) {
  return relevance_activation(net.scores(p, e_prev), net.output());
}

Var apply_and_norm(const Var& p, const Var& w, BatchNormState& state,
                   BatchNormMode mode, double eps, double momentum) {
  if (p.value().rank() != 4 || w.value().rank() != 2 ||
      w.shape()[0] != p.shape()[0] || w.shape()[1] != p.shape()[1]) {
    throw DimensionError("apply_and_norm: maps " + shape_string(p.shape()) +
                         " and weights " + shape_string(w.shape()) +
                         " disagree");
  }
  return batch_norm(scale_rows(p, w), state, mode, eps, momentum);
}

ModulationFrontend::ModulationFrontend(const ModulationConfig& config,
                                       std::size_t F, std::size_t T,
                                       std::size_t embed_dim, std::uint64_t seed)
    : config_((config.validate(F, T), config)),
      F_(F),
      T_(T),
      kernels_("modulation.kernels", "modulation_kernels", [&] {
        Rng rng = Rng::substream(seed, "init:modulation_kernels");
        const std::size_t fan = config.kf * config.kt;
        return xavier_normal(Shape{config.K, 1, config.kf, config.kt}, fan, fan,
                             rng);
      }()),
      net_([&] {
        Rng rng = Rng::substream(seed, "init:modulation_relevance");
        return ModulationRelevanceNet(
            config.pooled_rows(F) * config.pooled_cols(T), embed_dim,
            config.embed_proj_dim, config.relevance_hidden,
            config.relevance_output, rng);
      }()),
      bn_(config.K) {}

Shape ModulationFrontend::map_shape() const {
  return Shape{config_.K, config_.pooled_rows(F_), config_.pooled_cols(T_)};
}

ModulationTrace ModulationFrontend::forward(const Var& z, const Var& e_prev,
                                            bool relevance_on) const {
  ModulationTrace trace;
  trace.raw = modulation_filter(z, kernels_.var());
  trace.p = pool_maps(trace.raw, config_.pool_f, config_.pool_t);
  trace.w_m = relevance_on ? modulation_relevance(trace.p, e_prev, net_)
                           : Var::constant(Tensor(Shape{config_.K}, 1.0));
  return trace;
}

Var ModulationFrontend::normalize(const std::vector<Var>& maps,
                                  const std::vector<Var>& gates,
                                  BatchNormMode mode) {
  return apply_and_norm(stack(maps), stack(gates), bn_, mode, config_.bn_eps,
                        config_.bn_momentum);
}

Var ModulationFrontend::normalize_baseline(const std::vector<Var>& maps,
                                           BatchNormMode mode) {
  return batch_norm(stack(maps), bn_, mode, config_.bn_eps, config_.bn_momentum);
}

std::vector<Parameter*> ModulationFrontend::parameters() {
  std::vector<Parameter*> out{&kernels_};
  for (Parameter* p : net_.parameters()) out.push_back(p);
  return out;
}

}  // namespace relfb
