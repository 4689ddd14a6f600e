#include <benchmark/benchmark.h>

#include "relfb/embedding/embedding.hpp"
#include "relfb/frontend/acoustic.hpp"
#include "relfb/model/model.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace {

using namespace relfb;

Tensor noise(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal(0.0, 0.1);
  return t;
}

// One frame of 400 samples against a bank of F kernels of length 129.
void BM_Correlate1d(benchmark::State& state) {
  const auto filters = static_cast<std::size_t>(state.range(0));
  const Var signal = Var::constant(noise(Shape{400}, 1));
  const Var kernels = Var::constant(noise(Shape{filters, 129}, 2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(correlate1d_valid(signal, kernels).value().values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(filters));
}
BENCHMARK(BM_Correlate1d)->Arg(16)->Arg(80);

// Full-size spectrogram of one 101-frame block.
void BM_Spectrogram(benchmark::State& state) {
  const FrontendConfig cfg;
  const AcousticFrontend frontend(cfg, 200, 1);
  const Tensor block = noise(Shape{cfg.T, cfg.S}, 3);
  NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(frontend.spectrogram(block).value().values().data());
  }
}
BENCHMARK(BM_Spectrogram)->Unit(benchmark::kMillisecond);

// Eval-mode forward pass of one block through the toy-sized model.
void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.frontend.F = 16;
  cfg.frontend.L = 33;
  cfg.frontend.S = 128;
  cfg.frontend.shift = 64;
  cfg.frontend.T = 9;
  cfg.frontend.embed_proj_dim = 16;
  cfg.frontend.relevance_hidden = 32;
  cfg.modulation.K = 8;
  cfg.modulation.kf = 3;
  cfg.modulation.kt = 3;
  cfg.modulation.embed_proj_dim = 16;
  cfg.modulation.relevance_hidden = 32;
  cfg.backend.conv_layers = 1;
  cfg.backend.channels = 16;
  cfg.backend.pool_h = 1;
  cfg.backend.pool_w = 1;
  cfg.backend.dense = {128};
  FullModel model(cfg, 1);
  model.set_embedding(EmbeddingNet(cfg.vocab, cfg.embed_dim, 2));
  const Tensor block = noise(Shape{cfg.frontend.T, cfg.frontend.S}, 4);
  const Var e = model.label_feedback(0);
  NoGradGuard no_grad;
  for (auto _ : state) {
    const Var x = model.spectrogram(block);
    benchmark::DoNotOptimize(model.forward(x, e).posterior.value().values().data());
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
