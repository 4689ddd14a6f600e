#include <gtest/gtest.h>

#include <cmath>

#include "relfb/model/checkpoint.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/signal/framing.hpp"
#include "relfb/training/harness.hpp"
#include "test_helpers.hpp"

namespace relfb {
namespace {

struct Fixture {
  TrainConfig config = test::small_train_config();
  Dataset train = load_dataset(config.train_data, config.model);
  Dataset eval = load_dataset(*config.eval_data, config.model);
  std::optional<EmbeddingNet> embedding = resolve_embedding(config, train);

  TrainResult run(const TrainConfig& c, const FullModel* source = nullptr) const {
    return relfb::train(c, {&train, &eval, embedding ? &*embedding : nullptr, source});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TrainResult& trained() {
  static TrainResult r = fixture().run(fixture().config);
  return r;
}

TEST(Dataset, BlocksAndLabels) {
  const Dataset& d = fixture().train;
  EXPECT_EQ(d.utterances.size(), 6u);
  EXPECT_EQ(d.blocks(), 120u);
  EXPECT_EQ(d.vocab, 4u);
  for (const auto& u : d.utterances) {
    EXPECT_EQ(u.frames.dim(0), u.labels.size());
    EXPECT_EQ(u.frames.dim(1), 64u);
  }
}

TEST(Dataset, DirectoryRoundTrip) {
  const auto dir = test::scratch_dir("utt_dir");
  SyntheticSpec spec = *fixture().config.train_data.synthetic;
  const auto utts = synth_classification_dataset(spec, 3);
  write_utterance_dir(dir, utts, 4);
  const auto back = read_utterance_dir(dir);
  ASSERT_EQ(back.size(), utts.size());
  EXPECT_EQ(back[2].labels.senone_ids, utts[2].labels.senone_ids);
  EXPECT_EQ(utterance_dir_vocab(dir), 4u);
  EXPECT_EQ(read_label_dir(dir).size(), utts.size());
}

TEST(Dataset, LabelCountMismatchThrows) {
  auto utts = synth_classification_dataset(*fixture().config.train_data.synthetic, 3);
  utts[0].labels.senone_ids.pop_back();
  EXPECT_THROW(prepare_dataset(utts, framing_for(fixture().config.model.frontend), 4),
               FormatError);
}

TEST(Training, SameSeedIsBitIdentical) {
  TrainResult again = fixture().run(fixture().config);
  EXPECT_EQ(again.log.csv(), trained().log.csv());
  EXPECT_EQ(again.steps, trained().steps);
  for (Parameter* p : again.model.parameters()) {
    EXPECT_EQ(p->value(), trained().model.find_parameter(p->name())->value()) << p->name();
  }
}

TEST(Training, StepsFollowBatching) {
  // 120 blocks in batches of 16: 7 full batches and one of 8 per epoch.
  EXPECT_EQ(trained().steps, 16u);
  EXPECT_EQ(trained().log.rows().size(), 2u);
}

TEST(Training, UntrainedModelLossIsLnV) {
  const Fixture& f = fixture();
  FullModel m(f.config.model, f.config.seed);
  m.set_embedding(*f.embedding);
  const EvalResult r = evaluate(m, f.eval, EvalMode::kTeacherForced);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(Training, LossDecreases) {
  const auto& rows = trained().log.rows();
  EXPECT_LT(rows.back().train_loss, std::log(4.0));
  EXPECT_TRUE(rows.back().has_eval);
}

TEST(Training, FrozenGroupsStayBitIdentical) {
  TrainConfig c = fixture().config;
  c.freeze = {"embedding", "mu", "batch_norm"};
  TrainResult r = fixture().run(c);
  FullModel fresh(c.model, c.seed);
  FullModel& m = r.model;
  EXPECT_EQ(m.find_parameter("frontend.mu")->value(),
            fresh.find_parameter("frontend.mu")->value());
  EXPECT_EQ(m.embedding()->table().value(), fixture().embedding->table().value());
  EXPECT_EQ(m.batch_norm_state().running_var, fresh.batch_norm_state().running_var);
  EXPECT_NE(m.find_parameter("modulation.kernels")->value(),
            fresh.find_parameter("modulation.kernels")->value());
}

TEST(Training, MissingEmbeddingThrows) {
  const Fixture& f = fixture();
  EXPECT_THROW(relfb::train(f.config, {&f.train, &f.eval, nullptr, nullptr}), ConfigError);
  TrainConfig c = f.config;
  c.embedding.pretrain = false;
  EXPECT_THROW(resolve_embedding(c, f.train), ConfigError);
}

TEST(Evaluation, OnehotFeedbackMatchesTeacherForcing) {
  FullModel& m = trained().model;
  const EvalResult teacher = evaluate(m, fixture().eval, EvalMode::kTeacherForced);
  const EvalResult onehot = evaluate(m, fixture().eval, EvalMode::kFreeRunning,
                                     FeedbackSource::kGroundTruthOneHot);
  EXPECT_LE(std::abs(teacher.loss - onehot.loss), 1e-12);
  EXPECT_LE(std::abs(teacher.accuracy - onehot.accuracy), 1e-12);
  EXPECT_EQ(teacher.frames, 40u);
}

TEST(Evaluation, FutureLabelsDoNotLeak) {
  FullModel& m = trained().model;
  const PreparedUtterance& u = fixture().eval.utterances[0];
  const auto clean = utterance_posteriors(m, u, EvalMode::kTeacherForced);
  const std::size_t cut = 8;
  PreparedUtterance corrupted = u;
  for (std::size_t t = cut; t < corrupted.labels.size(); ++t) {
    corrupted.labels[t] = (corrupted.labels[t] + 1) % 4;
  }
  const auto dirty = utterance_posteriors(m, corrupted, EvalMode::kTeacherForced);
  for (std::size_t t = 0; t <= cut; ++t) EXPECT_EQ(dirty[t], clean[t]) << t;
  EXPECT_NE(dirty[cut + 1], clean[cut + 1]);
}

TEST(Evaluation, UtteranceOrderDoesNotMatter) {
  FullModel& m = trained().model;
  const Dataset& d = fixture().train;
  std::vector<std::vector<Tensor>> forward, reverse(d.utterances.size());
  for (const auto& u : d.utterances) {
    forward.push_back(utterance_posteriors(m, u, EvalMode::kFreeRunning));
  }
  for (std::size_t i = d.utterances.size(); i-- > 0;) {
    reverse[i] = utterance_posteriors(m, d.utterances[i], EvalMode::kFreeRunning);
  }
  EXPECT_EQ(forward, reverse);
}

TEST(Evaluation, PrecomputedSpectrogramMatchesPerBlockPath) {
  FullModel& m = trained().model;
  const PreparedUtterance& u = fixture().eval.utterances[1];
  const auto fast = utterance_posteriors(m, u, EvalMode::kTeacherForced);
  const std::size_t T = m.config().frontend.T;
  for (std::size_t t = 0; t < u.labels.size(); ++t) {
    const Var e = t == 0 ? m.zero_feedback() : m.label_feedback(u.labels[t - 1]);
    const Tensor slow = model_forward(assemble_block(u.frames, t, T), e, m).value();
    EXPECT_EQ(slow, fast[t]) << t;
  }
}

TEST(Evaluation, UniformModelScoresChance) {
  TrainConfig c = fixture().config;
  c.train_data.synthetic->transition = sticky_transition(4, 0.25);
  c.train_data.synthetic->utterances = 20;
  c.train_data.synthetic->min_frames = c.train_data.synthetic->max_frames = 50;
  const Dataset data = load_dataset(c.train_data, c.model);
  FullModel m(c.model, 1);
  m.set_embedding(*fixture().embedding);
  const EvalResult r = evaluate(m, data, EvalMode::kFreeRunning);
  const double n = static_cast<double>(r.frames);
  EXPECT_EQ(r.frames, 1000u);
  EXPECT_LE(std::abs(r.accuracy - 0.25), 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(Evaluation, CheckpointRoundTripKeepsMetrics) {
  const auto dir = test::scratch_dir("train_ckpt");
  FullModel& m = trained().model;
  save_checkpoint(dir, m, trained().steps, train_config_to_json(fixture().config));
  LoadedCheckpoint back = load_checkpoint(dir);
  for (auto mode : {EvalMode::kTeacherForced, EvalMode::kFreeRunning}) {
    const EvalResult a = evaluate(m, fixture().eval, mode);
    const EvalResult b = evaluate(back.model, fixture().eval, mode);
    EXPECT_LE(std::abs(a.loss - b.loss), 1e-12);
    EXPECT_EQ(a.accuracy, b.accuracy);
  }
}

TEST(Transfer, FullyFrozenSameDataReproducesSource) {
  TrainConfig c = fixture().config;
  c.epochs = 1;
  TransferSpec spec;
  spec.source = "source";
  spec.groups = {"mu", "acoustic_relevance", "modulation_kernels", "modulation_relevance",
                 "backend", "embedding", "batch_norm"};
  c.transfer = spec;
  const TrainResult r = fixture().run(c, &trained().model);
  EXPECT_EQ(r.log.last().eval_loss, trained().log.last().eval_loss);
  EXPECT_EQ(r.log.last().eval_acc, trained().log.last().eval_acc);
}

TEST(Transfer, MuFrozenBackendLearns) {
  TrainConfig c = fixture().config;
  c.transfer = TransferSpec{};
  c.transfer->source = "trained";
  TrainResult r = fixture().run(c, &trained().model);
  FullModel& m = r.model;
  EXPECT_EQ(m.find_parameter("frontend.mu")->value(),
            trained().model.find_parameter("frontend.mu")->value());
  EXPECT_FALSE(m.find_parameter("frontend.mu")->trainable());
}

TEST(Transfer, MismatchedBankThrows) {
  TrainConfig c = fixture().config;
  c.model.frontend.L = 15;
  c.transfer = TransferSpec{};
  try {
    transfer_filters(trained().model, c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "transfer");
  }
}

TEST(Ablation, StandardPlanOrder) {
  const ExperimentPlan plan = standard_ablation_plan(fixture().config);
  ASSERT_EQ(plan.rows.size(), 9u);
  EXPECT_EQ(plan.rows[0].name, "(A,M)");
  EXPECT_EQ(plan.rows[1].name, "A-R,M [Softmax, no embedding]");
  EXPECT_EQ(plan.rows[4].name, "A-R,M [Sigmoid, with embedding]");
  EXPECT_EQ(plan.rows[8].name, "A-R,M-R [Sigmoid, with embedding]");
  EXPECT_EQ(plan.rows[0].config.model.flags, (AblationFlags{false, false, false}));
  EXPECT_EQ(plan.rows[8].config.model.flags, (AblationFlags{true, true, true}));
  EXPECT_EQ(plan.rows[1].config.model.modulation.relevance_output, RelevanceOutput::kSoftmax);
  for (const auto& row : plan.rows) EXPECT_EQ(row.config.seed, fixture().config.seed);
}

TEST(Ablation, BaselineRowEqualsRelevanceFreePipeline) {
  TrainConfig c = standard_ablation_plan(fixture().config).rows[0].config;
  const TrainResult full = fixture().run(c);
  c.pipeline = Pipeline::kBaseline;
  const TrainResult base = fixture().run(c);
  EXPECT_LE(std::abs(full.log.last().train_loss - base.log.last().train_loss), 1e-12);
  EXPECT_LE(std::abs(full.log.last().eval_loss - base.log.last().eval_loss), 1e-12);
}

TEST(Ablation, SuiteRunsEveryRow) {
  TrainConfig base = fixture().config;
  base.epochs = 1;
  const auto rows = run_ablation_suite(standard_ablation_plan(base));
  ASSERT_EQ(rows.size(), 9u);
  const std::string table = format_ablation_table(rows);
  std::size_t lines = 0;
  for (char ch : table) lines += ch == '\n';
  EXPECT_EQ(lines, 10u);
  EXPECT_NE(table.find("A-R,M-R [Sigmoid, with embedding]"), std::string::npos);
}

TEST(Ablation, DuplicateNamesRejected) {
  ExperimentPlan plan;
  plan.rows = {{"a", fixture().config}, {"a", fixture().config}};
  EXPECT_THROW(plan.validate(), ConfigError);
}

TEST(Metrics, CsvFormat) {
  const std::string csv = trained().log.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,train_acc,eval_loss,eval_acc");
  MetricsLog log;
  log.append({1, 0.5, 0.25, 0.0, 0.0, false, 3.0});
  EXPECT_EQ(log.csv(), "epoch,train_loss,train_acc,eval_loss,eval_acc\n1,0.5,0.25,,\n");
  EXPECT_EQ(log.timing_csv(), "epoch,seconds\n1,3.000\n");
}

TEST(TrainConfigJson, RoundTripAndOverrides) {
  TrainConfig c = fixture().config;
  c.transfer = TransferSpec{"runs/a", {"mu", "backend"}, false};
  const std::string text = train_config_to_json(c);
  EXPECT_EQ(train_config_to_json(train_config_from_json(text)), text);

  const TrainConfig o = apply_overrides(c, R"({"epochs": 7, "model": {"flags": {"use_embedding": false}}})");
  EXPECT_EQ(o.epochs, 7u);
  EXPECT_FALSE(o.model.flags.use_embedding);
  EXPECT_EQ(o.batch_size, c.batch_size);
}

TEST(TrainConfigJson, ErrorsNameTheField) {
  try {
    train_config_from_json(R"({"epochs": 3, "learning_rate": 1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "learning_rate");
  }
  try {
    train_config_from_json(R"({"data": {"train": {"synthetic": {"classes": 2}}}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "data.train.synthetic.peaks_hz");
  }
  TrainConfig c = fixture().config;
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = fixture().config;
  c.freeze = {"everything"};
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace relfb
