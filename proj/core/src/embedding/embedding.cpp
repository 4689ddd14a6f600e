#include "relfb/embedding/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"
#include "relfb/signal/feature_file.hpp"
#include "relfb/signal/manifest.hpp"

namespace relfb {
namespace {

Tensor random_table(std::size_t vocab, std::size_t dim, std::uint64_t seed,
                    double scale) {
  if (vocab == 0 || dim == 0) {
    throw ConfigError("embedding", "vocabulary and dimension must be positive");
  }
  Rng rng = Rng::substream(seed, "init:embedding");
  Tensor t(Shape{vocab, dim});
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

struct Position {
  std::size_t center;
  std::size_t prev;
  std::size_t next;
};

std::vector<Position> interior_positions(std::span<const LabelSequence> sequences,
                                         std::size_t vocab, bool warn,
                                         std::size_t* skipped) {
  std::vector<Position> out;
  std::size_t short_count = 0;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const LabelSequence& seq = sequences[s];
    for (std::int32_t h : seq) {
      if (h < 0 || static_cast<std::size_t>(h) >= vocab) {
        throw ConfigError("labels", "senone id " + std::to_string(h) +
                                        " outside [0, " + std::to_string(vocab) +
                                        ")");
      }
    }
    if (seq.size() < 3) {
      ++short_count;
      if (warn) {
        std::cerr << "warning: skipping label sequence " << s << " of length "
                  << seq.size() << " (need at least 3)\n";
      }
      continue;
    }
    for (std::size_t t = 1; t + 1 < seq.size(); ++t) {
      out.push_back({static_cast<std::size_t>(seq[t]),
                     static_cast<std::size_t>(seq[t - 1]),
                     static_cast<std::size_t>(seq[t + 1])});
    }
  }
  if (skipped) *skipped = short_count;
  return out;
}

// Summed CE(prev) + CE(next) over a batch of positions, averaged.
Var batch_loss(const EmbeddingNet& net, std::span<const Position> batch) {
  std::vector<std::size_t> centers, prevs, nexts;
  centers.reserve(batch.size());
  prevs.reserve(batch.size());
  nexts.reserve(batch.size());
  for (const Position& p : batch) {
    centers.push_back(p.center);
    prevs.push_back(p.prev);
    nexts.push_back(p.next);
  }
  const Var e = gather_rows(net.table().var(), centers);
  const Var prev_post = softmax(matmul(e, net.head_prev().var()));
  const Var next_post = softmax(matmul(e, net.head_next().var()));
  return add(cross_entropy(prev_post, prevs), cross_entropy(next_post, nexts));
}

double corpus_loss(const EmbeddingNet& net, std::span<const Position> positions) {
  NoGradGuard no_grad;
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); i += kChunk) {
    const std::size_t n = std::min(kChunk, positions.size() - i);
    total += batch_loss(net, positions.subspan(i, n)).value()[0] *
             static_cast<double>(n);
  }
  return total / static_cast<double>(positions.size());
}

}  // namespace

EmbeddingNet::EmbeddingNet(std::size_t vocab, std::size_t dim,
                           std::uint64_t seed, double init_scale)
    : vocab_(vocab),
      dim_(dim),
      table_("embedding.table", "embedding",
             random_table(vocab, dim, seed, init_scale)),
      head_prev_(std::in_place, "embedding.head_prev", "embedding_heads",
                 Tensor(Shape{dim, vocab}, 0.0)),
      head_next_(std::in_place, "embedding.head_next", "embedding_heads",
                 Tensor(Shape{dim, vocab}, 0.0)) {}

EmbeddingNet::EmbeddingNet(Tensor table)
    : vocab_(table.rank() == 2 ? table.dim(0) : 0),
      dim_(table.rank() == 2 ? table.dim(1) : 0),
      table_("embedding.table", "embedding", std::move(table)) {
  if (vocab_ == 0 || dim_ == 0) {
    throw DimensionError("EmbeddingNet: table must be a non-empty [V,d] matrix");
  }
}

void EmbeddingNet::discard_heads() {
  head_prev_.reset();
  head_next_.reset();
}

std::vector<Parameter*> EmbeddingNet::parameters() {
  std::vector<Parameter*> out{&table_};
  if (head_prev_) {
    out.push_back(&*head_prev_);
    out.push_back(&*head_next_);
  }
  return out;
}

Var embed_onehot(std::size_t h, const EmbeddingNet& net) {
  if (h >= net.vocab()) {
    throw DimensionError("embed_onehot: senone " + std::to_string(h) +
                         " >= vocabulary " + std::to_string(net.vocab()));
  }
  return select(net.table().var(), h);
}

Var embed_posterior(const Var& posterior, const EmbeddingNet& net) {
  const Tensor& p = posterior.value();
  if (p.rank() != 1 || p.size() != net.vocab()) {
    throw DimensionError("embed_posterior: expected posterior [" +
                         std::to_string(net.vocab()) + "], got " +
                         shape_string(p.shape()));
  }
  double total = 0.0;
  for (double v : p.values()) {
    if (!(v >= 0.0)) throw std::invalid_argument("embed_posterior: negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("embed_posterior: entries sum to " + std::to_string(total));
  }
  return matmul(posterior, net.table().var());
}

double skipgram_loss(const EmbeddingNet& net,
                     std::span<const LabelSequence> sequences) {
  if (!net.has_heads()) {
    throw std::logic_error("skipgram_loss: prediction heads were discarded");
  }
  const auto positions = interior_positions(sequences, net.vocab(), false, nullptr);
  if (positions.empty()) throw ConfigError("labels", "corpus has no interior positions");
  return corpus_loss(net, positions);
}

PretrainResult pretrain_embeddings(std::span<const LabelSequence> sequences,
                                   std::size_t vocab, std::size_t dim,
                                   const PretrainConfig& config) {
  if (config.batch_size == 0) throw ConfigError("batch_size", "must be positive");
  std::size_t skipped = 0;
  std::vector<Position> positions =
      interior_positions(sequences, vocab, true, &skipped);
  if (positions.empty()) {
    throw ConfigError("labels", "empty corpus: no sequence has length >= 3");
  }

  PretrainResult result{EmbeddingNet(vocab, dim, config.seed, config.init_scale), 0.0,
                        0.0, {}, 0};
  result.skipped_sequences = skipped;
  EmbeddingNet& net = result.net;
  result.initial_loss = corpus_loss(net, positions);

  Adam adam(config.optimizer);
  Rng rng = Rng::substream(config.seed, "shuffle");
  const std::vector<Parameter*> params = net.parameters();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<Position>(positions));
    double total = 0.0;
    for (std::size_t i = 0; i < positions.size(); i += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, positions.size() - i);
      zero_grads(params);
      const Var loss =
          batch_loss(net, std::span<const Position>(positions).subspan(i, n));
      total += loss.value()[0] * static_cast<double>(n);
      backward(loss);
      adam.step(params);
    }
    result.epoch_losses.push_back(total / static_cast<double>(positions.size()));
  }
  result.final_loss = corpus_loss(net, positions);
  net.discard_heads();
  return result;
}

void export_embeddings(const EmbeddingNet& net, const std::filesystem::path& path) {
  write_features(path, net.table().value(), FeatureDType::kFloat32);
}

void save_embedding_checkpoint(const EmbeddingNet& net,
                               const std::filesystem::path& dir,
                               std::uint64_t seed, double final_loss) {
  std::filesystem::create_directories(dir);
  write_features(dir / "embedding.table.rwf", net.table().value(),
                 FeatureDType::kFloat64);
  char loss[64];
  std::snprintf(loss, sizeof loss, "%.17g", final_loss);
  write_manifest(dir / "manifest.txt",
                 {{"format", "relfb-embedding-v1"},
                  {"vocab", std::to_string(net.vocab())},
                  {"dim", std::to_string(net.dim())},
                  {"seed", std::to_string(seed)},
                  {"final_loss", loss}});
}

EmbeddingNet load_embedding_checkpoint(const std::filesystem::path& dir) {
  const Manifest manifest = read_manifest(dir / "manifest.txt");
  if (manifest_value(manifest, "format") != "relfb-embedding-v1") {
    throw FormatError("embedding checkpoint: unknown format '" +
                      manifest_value(manifest, "format") + "'");
  }
  Tensor table = read_features(dir / "embedding.table.rwf");
  if (std::to_string(table.dim(0)) != manifest_value(manifest, "vocab") ||
      std::to_string(table.dim(1)) != manifest_value(manifest, "dim")) {
    throw FormatError("embedding checkpoint: table shape " +
                      shape_string(table.shape()) + " disagrees with manifest");
  }
  return EmbeddingNet(std::move(table));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

double segregation_margin(const EmbeddingNet& net,
                          std::span<const std::size_t> group_of) {
  if (group_of.size() != net.vocab()) {
    throw DimensionError("segregation_margin: one group id per senone required");
  }
  const Tensor& table = net.table().value();
  const std::size_t d = net.dim();
  double within = 0.0, cross = 0.0;
  std::size_t n_within = 0, n_cross = 0;
  for (std::size_t i = 0; i < net.vocab(); ++i) {
    for (std::size_t j = i + 1; j < net.vocab(); ++j) {
      const double c = cosine_similarity(
          std::span<const double>(table.data() + i * d, d),
          std::span<const double>(table.data() + j * d, d));
      if (group_of[i] == group_of[j]) {
        within += c;
        ++n_within;
      } else {
        cross += c;
        ++n_cross;
      }
    }
  }
  if (n_within == 0 || n_cross == 0) {
    throw ConfigError("groups", "need at least two groups and one group of size >= 2");
  }
  return within / static_cast<double>(n_within) -
         cross / static_cast<double>(n_cross);
}

}  // namespace relfb
