#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "relfb/frontend/acoustic.hpp"
#include "relfb/numerics/autodiff.hpp"
#include "relfb/numerics/layers.hpp"
#include "relfb/numerics/ops.hpp"

namespace relfb {

struct ModulationConfig {
  std::size_t K = 40;
  std::size_t kf = 5;
  std::size_t kt = 5;
  /// Max-pool window (frequency, time).
  std::size_t pool_f = 3;
  std::size_t pool_t = 1;
  RelevanceOutput relevance_output = RelevanceOutput::kSigmoid;
  std::size_t embed_proj_dim = 50;
  std::size_t relevance_hidden = 64;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  /// Checks the config against a front-end output of F x T.
  void validate(std::size_t F, std::size_t T) const;
  /// Pooled map height F' and width T'.
  std::size_t pooled_rows(std::size_t F) const;
  std::size_t pooled_cols(std::size_t T) const;
};

/// Shared scorer applied to every map: [flatten(p_k) || Q e_prev] through a
/// sigmoid hidden layer to a scalar.
class ModulationRelevanceNet {
 public:
  ModulationRelevanceNet(std::size_t map_size, std::size_t embed_dim,
                         std::size_t proj_dim, std::size_t hidden,
                         RelevanceOutput output, Rng& rng);

  std::size_t embed_dim() const noexcept { return embed_dim_; }
  RelevanceOutput output() const noexcept { return output_; }

  /// Raw scores [K] for maps p [K,F',T'].
  Var scores(const Var& p, const Var& e_prev) const;

  std::vector<Parameter*> parameters();

 private:
  std::size_t map_size_;
  std::size_t embed_dim_;
  RelevanceOutput output_;
  std::optional<Dense> proj_;
  Dense hidden_;
  Dense out_;
};

/// Valid 2-D correlation of z [F,T] with kernels [K,1,kf,kt].
Var modulation_filter(const Var& z, const Var& kernels);
/// Max-pool each map of raw [K,H,W] with window (pool_f, pool_t).
Var pool_maps(const Var& raw, std::size_t pool_f = 3, std::size_t pool_t = 1);
/// w_m [K].
Var modulation_relevance(const Var& p, const Var& e_prev,
                         const ModulationRelevanceNet& net);
/// p [B,K,F',T'], w [B,K] -> batch_norm(w * p).
Var apply_and_norm(const Var& p, const Var& w, BatchNormState& state,
                   BatchNormMode mode, double eps = 1e-5, double momentum = 0.9);

struct ModulationTrace {
  Var raw;
  Var p;
  Var w_m;
};

/// Modulation kernels, relevance net and batch-norm statistics. Parameter
/// groups: "modulation_kernels", "modulation_relevance".
class ModulationFrontend {
 public:
  ModulationFrontend(const ModulationConfig& config, std::size_t F,
                     std::size_t T, std::size_t embed_dim, std::uint64_t seed);

  const ModulationConfig& config() const noexcept { return config_; }
  Shape map_shape() const;  // [K,F',T']

  Parameter& kernels() noexcept { return kernels_; }
  const Parameter& kernels() const noexcept { return kernels_; }
  ModulationRelevanceNet& relevance_net() noexcept { return net_; }
  BatchNormState& batch_norm_state() noexcept { return bn_; }
  const BatchNormState& batch_norm_state() const noexcept { return bn_; }

  /// relevance_on = false gates every map with exactly 1.
  ModulationTrace forward(const Var& z, const Var& e_prev,
                          bool relevance_on) const;
  /// Stacks per-example maps and gates and applies batch norm.
  Var normalize(const std::vector<Var>& maps, const std::vector<Var>& gates,
                BatchNormMode mode);
  /// Relevance-free reference path for maps only.
  Var normalize_baseline(const std::vector<Var>& maps, BatchNormMode mode);

  std::vector<Parameter*> parameters();

 private:
  ModulationConfig config_;
  std::size_t F_;
  std::size_t T_;
  Parameter kernels_;
  ModulationRelevanceNet net_;
  BatchNormState bn_;
};

}  // namespace relfb
