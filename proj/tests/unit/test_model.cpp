#include <gtest/gtest.h>

#include <cmath>

#include "relfb/model/backend.hpp"
#include "relfb/model/checkpoint.hpp"
#include "relfb/model/model.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/grad_check.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/training/verification.hpp"
#include "test_helpers.hpp"

namespace relfb {
namespace {

using test::random_tensor;

Var C(Tensor t) { return Var::constant(std::move(t)); }

double total(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

FullModel tiny_model(AblationFlags flags, std::uint64_t seed = 1) {
  ModelConfig cfg = tiny_model_config();
  cfg.flags = flags;
  FullModel m(cfg, seed);
  if (cfg.uses_embedding()) m.set_embedding(EmbeddingNet(cfg.vocab, cfg.embed_dim, seed, 0.5));
  return m;
}

Tensor random_block(const ModelConfig& cfg, Rng& rng) {
  return random_tensor(Shape{cfg.frontend.T, cfg.frontend.S}, rng, 0.3);
}

TEST(Backend, PosteriorIsNormalized) {
  Rng rng(1);
  BackendConfig cfg;
  cfg.conv_layers = 1;
  cfg.channels = 3;
  cfg.dense = {7};
  Backend b(cfg, Shape{2, 6, 5}, 5, 1);
  for (Parameter* p : b.parameters()) {
    for (double& v : p->value().values()) v = rng.normal();
  }
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor post = backend_forward(C(random_tensor(Shape{2, 6, 5}, rng)), b).value();
    EXPECT_NEAR(total(post), 1.0, 1e-6);
    for (double v : post.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Backend, ZeroOutputLayerIsUniform) {
  Rng rng(2);
  const Backend b(BackendConfig{}, Shape{4, 12, 12}, 6, 3);
  const Var post = backend_forward(C(random_tensor(Shape{4, 12, 12}, rng)), b);
  EXPECT_EQ(post.value(), Tensor(Shape{6}, 1.0 / 6.0));
  EXPECT_NEAR(cross_entropy(post, 2).value()[0], std::log(6.0), 1e-12);
}

TEST(Backend, ShapeMismatchThrows) {
  const Backend b(BackendConfig{}, Shape{4, 12, 12}, 6, 3);
  EXPECT_THROW(backend_forward(C(Tensor(Shape{4, 12, 11})), b), DimensionError);
  EXPECT_THROW(Backend(BackendConfig{}, Shape{4, 5, 5}, 6, 3), ConfigError);
}

TEST(Backend, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  BackendConfig cfg;
  cfg.conv_layers = 1;
  cfg.channels = 2;
  cfg.dense = {5};
  Backend b(cfg, Shape{2, 6, 5}, 4, 1);
  for (Parameter* p : b.parameters()) {
    for (double& v : p->value().values()) v = rng.normal(0.0, 0.7);
  }
  const Tensor q = random_tensor(Shape{2, 6, 5}, rng);
  GradCheckOptions opt;
  opt.max_coords_per_param = 1000;
  const auto r = grad_check([&] { return cross_entropy(backend_forward(C(q), b), 1); },
                            b.parameters(), opt);
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(FullModel, FlagsOffEqualsBaselineBitForBit) {
  Rng rng(5);
  FullModel m = tiny_model({false, false, false});
  m.randomize_parameters(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Var x = m.spectrogram(random_block(m.config(), rng));
    const Tensor full = m.forward(x, Var{}, Pipeline::kFull).posterior.value();
    const Tensor base = m.forward(x, Var{}, Pipeline::kBaseline).posterior.value();
    EXPECT_EQ(full, base);
  }
}

TEST(FullModel, WithoutEmbeddingIgnoresFeedback) {
  Rng rng(6);
  FullModel m = tiny_model({true, true, false});
  m.randomize_parameters(4);
  EXPECT_FALSE(m.label_feedback(2).defined());
  const Var x = m.spectrogram(random_block(m.config(), rng));
  const Tensor a = m.forward(x, C(random_tensor(Shape{8}, rng))).posterior.value();
  const Tensor b = m.forward(x, C(random_tensor(Shape{8}, rng))).posterior.value();
  EXPECT_EQ(a, b);
}

TEST(FullModel, FeedbackChangesOutputWhenUsed) {
  Rng rng(7);
  FullModel m = tiny_model({true, true, true});
  m.randomize_parameters(5);
  const Var x = m.spectrogram(random_block(m.config(), rng));
  EXPECT_NE(m.forward(x, m.label_feedback(1)).posterior.value(),
            m.forward(x, m.label_feedback(2)).posterior.value());
}

TEST(FullModel, ForwardIsPure) {
  Rng rng(8);
  FullModel m = tiny_model({true, true, true});
  m.randomize_parameters(6);
  const Tensor block = random_block(m.config(), rng);
  const Var e = m.label_feedback(4);
  const Tensor first = model_forward(block, e, m).value();
  model_forward(random_block(m.config(), rng), m.label_feedback(0), m);
  EXPECT_EQ(model_forward(block, e, m).value(), first);
  EXPECT_NEAR(total(first), 1.0, 1e-12);
}

TEST(FullModel, ZeroInitGatesCancelInInstanceNorm) {
  // Constant 0.5 acoustic gates scale each x row uniformly, and
  // instance_norm(0.5 x, eps) == instance_norm(x, 4 eps).
  Rng rng(9);
  FullModel gated = tiny_model({true, false, true});
  FullModel plain = tiny_model({false, false, true});
  for (int trial = 0; trial < 5; ++trial) {
    const Var x = gated.spectrogram(random_block(gated.config(), rng));
    const ModelTrace a = gated.forward(x, gated.label_feedback(1));
    const ModelTrace b = plain.forward(x, plain.label_feedback(1));
    EXPECT_EQ(a.acoustic.w_a.value(), Tensor(Shape{4}, 0.5));
    EXPECT_LE(max_abs_diff(a.acoustic.z.value(), instance_norm(x, 4e-5).value()), 1e-12);
    EXPECT_EQ(b.acoustic.z.value(), instance_norm(x, 1e-5).value());
  }
}

TEST(FullModel, MissingEmbeddingThrows) {
  const FullModel m(tiny_model_config(), 1);
  try {
    m.label_feedback(0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "embedding_checkpoint");
  }
}

TEST(FullModel, ParameterGroupsCoverEveryParameter) {
  FullModel m = tiny_model({true, true, true});
  std::size_t grouped = 0;
  for (auto g : kParameterGroups) grouped += m.parameters_in_group(g).size();
  EXPECT_EQ(grouped, m.parameters().size());
  EXPECT_NE(m.find_parameter("frontend.mu"), nullptr);
  EXPECT_NE(m.find_parameter("modulation.kernels"), nullptr);
}

TEST(FullModel, RandomizeKeepsMuInRange) {
  FullModel m = tiny_model({true, true, true});
  m.randomize_parameters(9);
  const auto& bank = m.frontend().bank();
  for (double mu : bank.parameter()->value().values()) {
    EXPECT_GE(mu, bank.min_frequency());
    EXPECT_LE(mu, bank.max_frequency());
  }
}

TEST(TinyGradCheck, EveryModulePasses) {
  const ModelGradCheck r = model_grad_check(tiny_model_config(), 1);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.max_rel_error, kGradCheckThreshold);
  std::vector<std::string> names;
  for (const auto& m : r.modules) names.push_back(m.module);
  for (const char* want : {"mu", "acoustic_relevance", "modulation_kernels",
                           "modulation_relevance", "backend", "embedding"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
  }
}

TEST(TinyGradCheck, InjectedBugIsCaught) {
  const ModelGradCheck r = model_grad_check(tiny_model_config(), 1, true, 4);
  EXPECT_FALSE(r.pass);
  for (const auto& m : r.modules) EXPECT_GT(m.max_rel_error, 1e-2) << m.module;
}

TEST(ModelConfigJson, RoundTripAndHash) {
  ModelConfig c = tiny_model_config();
  c.frontend.relevance_output = RelevanceOutput::kSoftmax;
  c.frontend.kernel = KernelFamily::kSinc;
  c.flags.modulation_relevance = false;
  const std::string text = model_config_to_json(c);
  const ModelConfig back = model_config_from_json(text);
  EXPECT_EQ(model_config_to_json(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  EXPECT_NE(config_hash(c), config_hash(tiny_model_config()));
}

TEST(ModelConfigJson, UnknownAndBadFieldsNameTheKey) {
  try {
    model_config_from_json(R"({"frontend": {"F": 8, "wobble": 1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(e.field().find("wobble"), std::string::npos);
  }
  try {
    model_config_from_json(R"({"frontend": {"L": "long"}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(e.field().find("L"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = test::scratch_dir("model_ckpt");
  FullModel m = tiny_model({true, true, true});
  m.randomize_parameters(11);
  m.batch_norm_state().running_mean[1] = 0.25;
  save_checkpoint(dir, m, 42, "{}");
  LoadedCheckpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(manifest_value(back.manifest, "config_hash"), config_hash(m.config()));
  ASSERT_EQ(back.model.parameters().size(), m.parameters().size());
  for (Parameter* p : m.parameters()) {
    const Parameter* q = back.model.find_parameter(p->name());
    ASSERT_NE(q, nullptr) << p->name();
    EXPECT_EQ(q->value(), p->value()) << p->name();
  }
  EXPECT_EQ(back.model.batch_norm_state().running_mean, m.batch_norm_state().running_mean);

  Rng rng(12);
  const Var x = m.spectrogram(random_block(m.config(), rng));
  EXPECT_EQ(back.model.forward(x, back.model.label_feedback(3)).posterior.value(),
            m.forward(x, m.label_feedback(3)).posterior.value());
}

TEST(Checkpoint, HashMismatchIsRejected) {
  const auto dir = test::scratch_dir("model_ckpt_hash");
  FullModel m = tiny_model({true, true, true});
  save_checkpoint(dir, m, 1);
  ModelConfig other = tiny_model_config();
  other.vocab = 11;
  FullModel wrong(other, 1);
  EXPECT_THROW(restore_parameters(dir, wrong), FormatError);
}

}  // namespace
}  // namespace relfb
