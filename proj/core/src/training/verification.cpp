#include "relfb/training/verification.hpp"

#include <chrono>

#include "relfb/numerics/grad_check.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.frontend.F = 4;
  c.frontend.L = 9;
  c.frontend.S = 32;
  c.frontend.shift = 16;
  c.frontend.T = 7;
  c.frontend.embed_proj_dim = 3;
  c.frontend.relevance_hidden = 4;
  c.modulation.K = 3;
  c.modulation.kf = 3;
  c.modulation.kt = 3;
  c.modulation.pool_f = 2;
  c.modulation.pool_t = 1;
  c.modulation.embed_proj_dim = 3;
  c.modulation.relevance_hidden = 4;
  c.backend.conv_layers = 1;
  c.backend.channels = 2;
  c.backend.kernel_h = 1;
  c.backend.kernel_w = 3;
  c.backend.pool_h = 1;
  c.backend.pool_w = 1;
  c.backend.dense = {5};
  c.vocab = 10;
  c.embed_dim = 8;
  return c;
}

ModelGradCheck model_grad_check(const ModelConfig& config, std::uint64_t seed,
                                bool inject_bug, std::size_t max_coords_per_param) {
  const auto start = std::chrono::steady_clock::now();
  FullModel model(config, seed);
  if (config.uses_embedding()) {
    model.set_embedding(EmbeddingNet(config.vocab, config.embed_dim, seed, 0.5));
  }
  model.randomize_parameters(seed);
  model.batch_norm_state().update_running = false;

  Rng rng = Rng::substream(seed, "grad-check");
  constexpr std::size_t kBatch = 3;
  const FrontendConfig& fc = config.frontend;
  std::vector<Var> blocks;
  std::vector<std::size_t> previous, targets;
  for (std::size_t b = 0; b < kBatch; ++b) {
    Tensor block(Shape{fc.T, fc.S});
    for (double& v : block.values()) v = rng.normal(0.0, 0.3);
    blocks.push_back(Var::constant(std::move(block)));
    previous.push_back(rng.index(config.vocab));
    targets.push_back(rng.index(config.vocab));
  }

  const auto loss_fn = [&]() {
    std::vector<Var> xs, es;
    for (std::size_t b = 0; b < kBatch; ++b) {
      xs.push_back(model.spectrogram(blocks[b].value()));
      es.push_back(model.label_feedback(previous[b]));
    }
    const auto traces = model.forward_batch(xs, es, BatchNormMode::kTrain);
    std::vector<Var> posteriors;
    for (const ModelTrace& tr : traces) posteriors.push_back(tr.posterior);
    return cross_entropy(stack(posteriors), targets);
  };

  GradCheckOptions options;
  options.seed = seed;
  options.inject_bug = inject_bug;
  options.max_coords_per_param = max_coords_per_param;
  const GradCheckResult result = grad_check(loss_fn, model.parameters(), options);

  ModelGradCheck out;
  for (std::string_view group : kParameterGroups) {
    ModuleGradReport report;
    report.module = std::string(group);
    for (const ParamGradReport& p : result.params) {
      if (p.group != group) continue;
      report.coords += p.coords_checked;
      report.max_rel_error = std::max(report.max_rel_error, p.max_rel_error);
    }
    if (report.coords == 0) continue;
    report.pass = report.max_rel_error <= kGradCheckThreshold;
    out.modules.push_back(report);
  }
  out.max_rel_error = result.max_rel_error;
  out.pass = out.max_rel_error <= kGradCheckThreshold;
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace relfb
