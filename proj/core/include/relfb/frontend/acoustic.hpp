#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "relfb/frontend/kernel_bank.hpp"
#include "relfb/numerics/autodiff.hpp"
#include "relfb/numerics/layers.hpp"

namespace relfb {

enum class RelevanceOutput { kSigmoid, kSoftmax };

std::string_view to_string(RelevanceOutput output);
RelevanceOutput relevance_output_from_string(std::string_view name);

/// Sigmoid per entry, or softmax across the whole score vector.
Var relevance_activation(const Var& scores, RelevanceOutput output);

struct FrontendConfig {
  KernelFamily kernel = KernelFamily::kCosineGaussian;
  std::size_t F = 80;
  std::size_t L = 129;
  std::size_t S = 400;
  std::size_t shift = 160;
  std::size_t T = 101;
  RelevanceOutput relevance_output = RelevanceOutput::kSigmoid;
  std::size_t embed_proj_dim = 50;
  std::size_t relevance_hidden = 100;
  double log_floor = 1e-8;
  double norm_eps = 1e-5;
  /// Learnable per-band scale and shift after the instance norm.
  bool norm_affine = false;

  void validate() const;
};

/// Shared two-layer scorer applied to every sub-band: input
/// [x_t(f) || tanh(P e_prev)], sigmoid hidden layer, scalar output.
class AcousticRelevanceNet {
 public:
  /// `embed_dim` = 0 builds the net without the embedding branch.
  AcousticRelevanceNet(std::size_t context, std::size_t embed_dim,
                       std::size_t proj_dim, std::size_t hidden,
                       RelevanceOutput output, Rng& rng);

  std::size_t context() const noexcept { return context_; }
  std::size_t embed_dim() const noexcept { return embed_dim_; }
  RelevanceOutput output() const noexcept { return output_; }

  /// Raw per-band scores [F] before the output nonlinearity.
  Var scores(const Var& x, const Var& e_prev) const;

  std::vector<Parameter*> parameters();

 private:
  std::size_t context_;
  std::size_t embed_dim_;
  RelevanceOutput output_;
  std::optional<Dense> proj_;
  Dense hidden_;
  Dense out_;
};

/// x [F,T]: log of the mean squared valid correlation of each frame with
/// each kernel. block is [T,S], kernels [F,L].
Var compute_spectrogram(const Tensor& block, const Var& kernels,
                        double floor = 1e-8);

/// w_a [F]: shared net scores per sub-band followed by the output activation.
Var acoustic_relevance(const Var& x, const Var& e_prev,
                       const AcousticRelevanceNet& net);

/// y[f][.] = w_a(f) x[f][.].
Var apply_relevance(const Var& x, const Var& w_a);

/// Intermediate results of one front-end pass.
struct FrontendTrace {
  Var x;
  Var w_a;
  Var y;
  Var z;
};

/// Kernel bank, relevance net and instance norm. Parameter groups:
/// "mu" (bank), "acoustic_relevance" (net), "instance_norm" (affine, if on).
class AcousticFrontend {
 public:
  /// `embed_dim` = 0 disables the embedding feedback branch.
  AcousticFrontend(const FrontendConfig& config, std::size_t embed_dim,
                   std::uint64_t seed);

  const FrontendConfig& config() const noexcept { return config_; }
  KernelBank& bank() noexcept { return bank_; }
  const KernelBank& bank() const noexcept { return bank_; }
  AcousticRelevanceNet& relevance_net() noexcept { return net_; }
  const AcousticRelevanceNet& relevance_net() const noexcept { return net_; }

  Var spectrogram(const Tensor& block) const;
  /// Spectrogram column per frame for frames [N,S]; result [F,N].
  Var spectrogram_frames(const Tensor& frames) const;

  /// relevance_on = false gates every band with exactly 1.
  FrontendTrace forward(const Tensor& block, const Var& e_prev,
                        bool relevance_on) const;
  FrontendTrace forward_from_spectrogram(const Var& x, const Var& e_prev,
                                         bool relevance_on) const;
  /// Relevance-free reference path: z = instance_norm(x).
  Var baseline(const Var& x) const;

  std::vector<Parameter*> parameters();

 private:
  Var normalize(const Var& y) const;

  FrontendConfig config_;
  KernelBank bank_;
  AcousticRelevanceNet net_;
  std::optional<Parameter> gain_;
  std::optional<Parameter> offset_;
};

/// z = instance_norm(apply_relevance(x, acoustic_relevance(x, e_prev))).
Var frontend_forward(const Tensor& block, const Var& e_prev,
                     const AcousticFrontend& frontend);

}  // namespace relfb
