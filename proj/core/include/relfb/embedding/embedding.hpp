#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "relfb/numerics/adam.hpp"
#include "relfb/numerics/autodiff.hpp"

namespace relfb {

using LabelSequence = std::vector<std::int32_t>;

/// Skip-gram senone embedding. The table W_in [V,d] maps a senone to its
/// embedding; the prediction heads W_prev, W_next [d,V] exist only for
/// pre-training.
class EmbeddingNet {
 public:
  EmbeddingNet(std::size_t vocab, std::size_t dim, std::uint64_t seed,
               double init_scale = 0.1);
  /// Wraps an existing table [V,d] (no heads).
  explicit EmbeddingNet(Tensor table);

  std::size_t vocab() const noexcept { return vocab_; }
  std::size_t dim() const noexcept { return dim_; }

  Parameter& table() noexcept { return table_; }
  const Parameter& table() const noexcept { return table_; }

  bool has_heads() const noexcept { return head_prev_.has_value(); }
  Parameter& head_prev() { return *head_prev_; }
  Parameter& head_next() { return *head_next_; }
  const Parameter& head_prev() const { return *head_prev_; }
  const Parameter& head_next() const { return *head_next_; }
  void discard_heads();

  std::vector<Parameter*> parameters();

 private:
  std::size_t vocab_;
  std::size_t dim_;
  Parameter table_;
  std::optional<Parameter> head_prev_;
  std::optional<Parameter> head_next_;
};

/// Row h of the table.
Var embed_onehot(std::size_t h, const EmbeddingNet& net);
/// W_in^T posterior. The posterior must be a distribution over V.
Var embed_posterior(const Var& posterior, const EmbeddingNet& net);

struct PretrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  AdamConfig optimizer{.lr = 1e-2};
  std::uint64_t seed = 1;
  double init_scale = 0.1;
};

struct PretrainResult {
  EmbeddingNet net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
  std::size_t skipped_sequences = 0;
};

/// Mean over interior positions of CE(prev) + CE(next). Needs heads.
double skipgram_loss(const EmbeddingNet& net,
                     std::span<const LabelSequence> sequences);

/// Trains table and heads with Adam on all interior positions, then drops the
/// heads. Sequences shorter than 3 are skipped with a warning on stderr; a
/// corpus without interior positions throws ConfigError.
PretrainResult pretrain_embeddings(std::span<const LabelSequence> sequences,
                                   std::size_t vocab, std::size_t dim,
                                   const PretrainConfig& config);

/// Writes the V x d table as a float32 feature file.
void export_embeddings(const EmbeddingNet& net, const std::filesystem::path& path);

/// Directory with manifest.txt and the float64 table.
void save_embedding_checkpoint(const EmbeddingNet& net,
                               const std::filesystem::path& dir,
                               std::uint64_t seed, double final_loss);
EmbeddingNet load_embedding_checkpoint(const std::filesystem::path& dir);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Mean within-group minus mean cross-group cosine similarity of table rows.
/// `group_of[v]` assigns each senone a group id.
double segregation_margin(const EmbeddingNet& net,
                          std::span<const std::size_t> group_of);

}  // namespace relfb
