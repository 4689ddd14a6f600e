// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "relfb/frontend/kernel_bank.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/signal/synth.hpp"
#include "relfb/training/harness.hpp"
#include "relfb/training/verification.hpp"

namespace {

using namespace relfb;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kFidelityBins = 1.0;
constexpr double kOracleTolerance = 1e-12;
constexpr int kOracleInstances = 100;
constexpr double kAblationTolerance = 1e-12;
constexpr int kAblationInputs = 20;
constexpr double kToyTrainAcc = 0.80;
constexpr double kToyEvalAcc = 0.60;
constexpr std::size_t kToyTrainBlocks = 4000;
constexpr std::size_t kToyEvalBlocks = 1000;
constexpr std::size_t kToyMaxEpochs = 30;
constexpr double kToyBudgetSeconds = 600.0;
constexpr double kSegregationMargin = 0.1;
constexpr double kConsistencyTolerance = 1e-12;
constexpr double kTransferChanceFactor = 3.0;

int g_failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.index(hi - lo + 1);
}

void gradient_correctness() {
  const auto start = Clock::now();
  const ModelGradCheck r = model_grad_check(tiny_model_config(), 1);
  const double seconds = seconds_since(start);
  std::string detail;
  for (const auto& m : r.modules) detail += fmt("%s=%.2e ", m.module.c_str(), m.max_rel_error);
  detail += fmt("max=%.3e (tol %.0e) time=%.2fs (budget %.0fs)", r.max_rel_error,
                kGradTolerance, seconds, kGradBudgetSeconds);
  report("gradient-correctness", r.max_rel_error <= kGradTolerance && seconds <= kGradBudgetSeconds,
         detail);
}

void filter_fidelity() {
  const std::size_t L = 129;
  bool pass = true;
  std::string detail;
  for (int i = 1; i <= 9; ++i) {
    const double mu = 0.05 * i;
    const Tensor k = build_kernels(Var::constant(Tensor::vector({mu})), L).value();
    const auto mag = magnitude_spectrum(k.slice(0), 1024);
    const auto peak = static_cast<double>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    const double target = std::round(1024.0 * mu);
    const bool ok = std::abs(peak - target) <= kFidelityBins;
    pass = pass && ok;
    detail += fmt("%.2f:%g/%g%s ", mu, peak, target, ok ? "" : "(off)");
  }
  report("filter-fidelity", pass, detail + "(argmax/target bin, tolerance +-1)");
}

void oracle_equivalence() {
  Rng rng = Rng::substream(7, "acceptance-oracle");
  double worst[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < kOracleInstances; ++i) {
    const std::size_t S = uniform_size(rng, 8, 40);
    const std::size_t L = uniform_size(rng, 1, S);
    const Tensor s = random_tensor(Shape{S}, rng);
    const Tensor k1 = random_tensor(Shape{uniform_size(rng, 1, 5), L}, rng);
    worst[0] = std::max(worst[0], max_abs_diff(correlate1d_valid(Var::constant(s), Var::constant(k1)).value(),
                                               oracle::correlate1d(s, k1)));

    const std::size_t C = uniform_size(rng, 1, 3), H = uniform_size(rng, 3, 10),
                      W = uniform_size(rng, 3, 10);
    const Tensor img = random_tensor(Shape{C, H, W}, rng);
    const Tensor k2 = random_tensor(
        Shape{uniform_size(rng, 1, 4), C, uniform_size(rng, 1, H), uniform_size(rng, 1, W)}, rng);
    worst[1] = std::max(worst[1], max_abs_diff(correlate2d_valid(Var::constant(img), Var::constant(k2)).value(),
                                               oracle::correlate2d(img, k2)));

    const std::size_t ph = uniform_size(rng, 1, H), pw = uniform_size(rng, 1, W);
    worst[2] = std::max(worst[2], max_abs_diff(maxpool2d(Var::constant(img), ph, pw).value(),
                                               oracle::maxpool(img, ph, pw)));

    const Tensor x = random_tensor(Shape{uniform_size(rng, 1, 8), uniform_size(rng, 2, 12)}, rng,
                                   rng.uniform(0.1, 10.0));
    worst[3] = std::max(worst[3], max_abs_diff(instance_norm(Var::constant(x), 1e-5).value(),
                                               oracle::instance_norm(x, 1e-5)));

    const Tensor b = random_tensor(
        Shape{uniform_size(rng, 2, 4), uniform_size(rng, 1, 4), uniform_size(rng, 1, 5),
              uniform_size(rng, 1, 5)},
        rng, rng.uniform(0.1, 10.0));
    BatchNormState state(b.dim(1));
    const Tensor train = batch_norm(Var::constant(b), state, BatchNormMode::kTrain, 1e-5, 0.9).value();
    const Tensor eval = batch_norm(Var::constant(b), state, BatchNormMode::kEval, 1e-5, 0.9).value();
    worst[4] = std::max({worst[4], max_abs_diff(train, oracle::batch_norm_train(b, 1e-5).y),
                         max_abs_diff(eval, oracle::batch_norm_eval(b, state.running_mean,
                                                                    state.running_var, 1e-5))});
  }
  const bool pass = *std::max_element(worst, worst + 5) <= kOracleTolerance;
  report("oracle-equivalence", pass,
         fmt("%d instances each; max abs diff correlate1d=%.1e correlate2d=%.1e maxpool=%.1e "
             "instance_norm=%.1e batch_norm=%.1e (tol %.0e)",
             kOracleInstances, worst[0], worst[1], worst[2], worst[3], worst[4], kOracleTolerance));
}

void ablation_identity(const TrainConfig& toy) {
  ModelConfig cfg = toy.model;
  cfg.flags = {false, false, false};
  FullModel model(cfg, 3);
  model.randomize_parameters(3);
  Rng rng = Rng::substream(3, "acceptance-ablation");
  double worst = 0.0;
  for (int i = 0; i < kAblationInputs; ++i) {
    const Var x = model.spectrogram(random_tensor(Shape{cfg.frontend.T, cfg.frontend.S}, rng, 0.3));
    const ModelTrace full = model.forward(x, Var{}, Pipeline::kFull);
    const ModelTrace base = model.forward(x, Var{}, Pipeline::kBaseline);
    worst = std::max({worst, max_abs_diff(full.posterior.value(), base.posterior.value()),
                      max_abs_diff(full.q.value(), base.q.value())});
  }
  report("ablation-identity", worst <= kAblationTolerance,
         fmt("%d inputs, max abs diff of q and posterior %.1e (tol %.0e)", kAblationInputs, worst,
             kAblationTolerance));
}

struct ToyRun {
  TrainResult result;
  double seconds = 0.0;
};

ToyRun train_toy(const TrainConfig& config, const Dataset& train, const Dataset& eval,
                 const EmbeddingNet* embedding) {
  const auto start = Clock::now();
  TrainResult r = relfb::train(config, {&train, &eval, embedding, nullptr});
  return {std::move(r), seconds_since(start)};
}

void segregation() {
  const std::size_t vocab = 16, groups = 4;
  std::vector<std::size_t> group_of(vocab);
  for (std::size_t v = 0; v < vocab; ++v) group_of[v] = v % groups;
  const TransitionMatrix t = grouped_transition(group_of, 0.3, 0.6);
  Rng rng = Rng::substream(1, "data-synth");
  std::vector<LabelSequence> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(sample_markov_sequence(t, 100, rng));
  PretrainConfig cfg;
  const PretrainResult r = pretrain_embeddings(corpus, vocab, 200, cfg);
  const double margin = segregation_margin(r.net, group_of);
  report("embedding-segregation", margin > kSegregationMargin,
         fmt("V=%zu d=200, 4 groups, within-minus-cross cosine margin %.4f (need > %.1f); "
             "skip-gram loss %.4f -> %.4f",
             vocab, margin, kSegregationMargin, r.initial_loss, r.final_loss));
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path config_dir = argc > 1 ? argv[1] : RELFB_CONFIG_DIR;
  std::printf("relfb acceptance suite (configs from %s)\n", config_dir.string().c_str());

  gradient_correctness();
  filter_fidelity();
  oracle_equivalence();

  const TrainConfig toy = load_train_config(config_dir / "toy.json");
  ablation_identity(toy);

  // End-to-end toy training, run twice for determinism.
  const Dataset train_a = load_dataset(toy.train_data, toy.model);
  const Dataset eval_a = load_dataset(*toy.eval_data, toy.model);
  const std::optional<EmbeddingNet> embed_a = resolve_embedding(toy, train_a);
  const EmbeddingNet* embed_ptr = embed_a ? &*embed_a : nullptr;
  ToyRun first = train_toy(toy, train_a, eval_a, embed_ptr);
  const ToyRun second = train_toy(toy, train_a, eval_a, embed_ptr);
  const EpochMetrics& last = first.result.log.last();
  const bool identical = first.result.log.csv() == second.result.log.csv();
  const bool toy_pass = train_a.blocks() == kToyTrainBlocks && eval_a.blocks() == kToyEvalBlocks &&
                        toy.epochs <= kToyMaxEpochs && last.train_acc >= kToyTrainAcc &&
                        last.eval_acc >= kToyEvalAcc && identical &&
                        std::max(first.seconds, second.seconds) <= kToyBudgetSeconds;
  report("toy-training", toy_pass,
         fmt("%zu train / %zu held-out blocks, %zu epochs: train_acc=%.4f (>= %.2f) "
             "eval_acc=%.4f (>= %.2f); rerun metrics %s; time %.1fs/%.1fs (budget %.0fs)",
             train_a.blocks(), eval_a.blocks(), toy.epochs, last.train_acc, kToyTrainAcc,
             last.eval_acc, kToyEvalAcc, identical ? "bit-identical" : "DIFFER", first.seconds,
             second.seconds, kToyBudgetSeconds));

  segregation();

  FullModel& source = first.result.model;
  const EvalResult teacher = evaluate(source, eval_a, EvalMode::kTeacherForced);
  const EvalResult onehot =
      evaluate(source, eval_a, EvalMode::kFreeRunning, FeedbackSource::kGroundTruthOneHot);
  const EvalResult free = evaluate(source, eval_a, EvalMode::kFreeRunning);
  const double loss_gap = std::abs(teacher.loss - onehot.loss);
  const double acc_gap = std::abs(teacher.accuracy - onehot.accuracy);
  report("teacher-free-consistency",
         loss_gap <= kConsistencyTolerance && acc_gap <= kConsistencyTolerance,
         fmt("teacher loss=%.17g acc=%.6f; free(one-hot) loss=%.17g acc=%.6f; gaps %.1e/%.1e "
             "(tol %.0e); free(model posteriors) acc=%.6f",
             teacher.loss, teacher.accuracy, onehot.loss, onehot.accuracy, loss_gap, acc_gap,
             kConsistencyTolerance, free.accuracy));

  // Cross-domain transfer: mu from A, frozen, rest trained on B.
  const TrainConfig to_b = load_train_config(config_dir / "transfer_b.json");
  const Dataset train_b = load_dataset(to_b.train_data, to_b.model);
  const Dataset eval_b = load_dataset(*to_b.eval_data, to_b.model);
  const std::optional<EmbeddingNet> embed_b = resolve_embedding(to_b, train_b);
  const TrainResult b = relfb::train(
      to_b, {&train_b, &eval_b, embed_b ? &*embed_b : nullptr, &source});
  const bool mu_frozen = b.model.find_parameter("frontend.mu")->value() ==
                         source.find_parameter("frontend.mu")->value();
  const double chance = 1.0 / static_cast<double>(to_b.model.vocab);

  // Fully frozen transfer on dataset A must reproduce the source metrics.
  TrainConfig frozen = toy;
  frozen.epochs = 1;
  TransferSpec all;
  all.source = "toy";
  all.groups = {"mu", "acoustic_relevance", "instance_norm", "modulation_kernels",
                "modulation_relevance", "backend", "embedding", "batch_norm"};
  frozen.transfer = all;
  const TrainResult same = relfb::train(frozen, {&train_a, &eval_a, embed_ptr, &source});
  const bool reproduced = same.log.last().eval_loss == last.eval_loss &&
                          same.log.last().eval_acc == last.eval_acc;
  report("cross-domain-transfer",
         b.log.last().eval_acc >= kTransferChanceFactor * chance && mu_frozen && reproduced,
         fmt("A->B with frozen mu (%s): eval_acc=%.4f (>= %.0fx chance = %.3f); fully frozen A->A "
             "eval loss/acc %.17g/%.4f vs source %.17g/%.4f (%s)",
             mu_frozen ? "bit-identical" : "CHANGED", b.log.last().eval_acc,
             kTransferChanceFactor, kTransferChanceFactor * chance, same.log.last().eval_loss,
             same.log.last().eval_acc, last.eval_loss, last.eval_acc,
             reproduced ? "exact" : "DIFFER"));

  std::printf("summary: %d of 8 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
