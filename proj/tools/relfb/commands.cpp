#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "relfb/embedding/embedding.hpp"
#include "relfb/frontend/kernel_bank.hpp"
#include "relfb/model/checkpoint.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/signal/feature_file.hpp"
#include "relfb/signal/framing.hpp"
#include "relfb/signal/synth.hpp"
#include "relfb/signal/wav.hpp"
#include "relfb/training/config.hpp"
#include "relfb/training/dataset.hpp"
#include "relfb/training/harness.hpp"
#include "relfb/training/verification.hpp"

namespace fs = std::filesystem;

namespace relfb::cli {
namespace {

std::string read_text(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_epoch(const EpochMetrics& m) {
  std::cout << "epoch=" << m.epoch << " train_loss=" << g17(m.train_loss)
            << " train_acc=" << g17(m.train_acc);
  if (m.has_eval) {
    std::cout << " eval_loss=" << g17(m.eval_loss) << " eval_acc=" << g17(m.eval_acc);
  }
  std::cout << '\n' << std::flush;
}

Pipeline checkpoint_pipeline(const LoadedCheckpoint& ckpt) {
  const auto it = ckpt.manifest.find("config");
  if (it == ckpt.manifest.end()) return Pipeline::kFull;
  return train_config_from_json(it->second).pipeline;
}

}  // namespace

int synth_data(const SynthDataArgs& args) {
  const SyntheticSpec spec = synthetic_spec_from_json(read_text(args.spec, "spec"));
  const auto utterances = synth_classification_dataset(spec, args.seed);
  write_utterance_dir(args.out, utterances, spec.classes);
  std::size_t frames = 0;
  for (const Utterance& u : utterances) frames += u.labels.senone_ids.size();
  std::cout << "utterances=" << utterances.size() << " frames=" << frames
            << " out=" << args.out << '\n';
  return kExitOk;
}

int pretrain_embed(const PretrainArgs& args) {
  const auto sequences = read_label_dir(args.labels);
  std::size_t vocab = args.vocab;
  if (vocab == 0) vocab = utterance_dir_vocab(args.labels).value_or(0);
  if (vocab == 0) {
    for (const LabelSequence& s : sequences) {
      for (std::int32_t h : s) vocab = std::max(vocab, static_cast<std::size_t>(h) + 1);
    }
  }
  PretrainConfig config;
  config.epochs = args.epochs;
  config.batch_size = args.batch_size;
  config.optimizer.lr = args.lr;
  config.seed = args.seed;
  PretrainResult result = [&] {
    try {
      return pretrain_embeddings(sequences, vocab, args.dim, config);
    } catch (const ConfigError& e) {
      throw std::runtime_error(e.what());
    }
  }();
  save_embedding_checkpoint(result.net, args.out, args.seed, result.final_loss);
  export_embeddings(result.net, fs::path(args.out) / "embeddings.rwf");
  std::cout << "vocab=" << vocab << " dim=" << args.dim
            << " initial_loss=" << g17(result.initial_loss)
            << " final_loss=" << g17(result.final_loss)
            << " skipped=" << result.skipped_sequences << '\n';
  return kExitOk;
}

int train(const TrainArgs& args) {
  TrainConfig config = load_train_config(args.config);
  if (!args.embed.empty()) config.embedding.checkpoint = args.embed;
  TrainResult result = run_training(config, print_epoch);
  save_checkpoint(args.out, result.model, result.steps, train_config_to_json(config));
  result.log.write(args.out);
  std::cout << "checkpoint=" << args.out << " steps=" << result.steps << '\n';
  return kExitOk;
}

int eval(const EvalArgs& args) {
  const EvalMode mode = eval_mode_from_string(args.mode);
  const FeedbackSource feedback = args.feedback == "onehot"
                                      ? FeedbackSource::kGroundTruthOneHot
                                      : FeedbackSource::kModelPosterior;
  LoadedCheckpoint ckpt = load_checkpoint(args.ckpt);
  const Pipeline pipeline = checkpoint_pipeline(ckpt);
  const Dataset data =
      prepare_dataset(read_utterance_dir(args.data),
                      framing_for(ckpt.model.config().frontend), ckpt.model.config().vocab);
  const EvalResult r = evaluate(ckpt.model, data, mode, feedback, pipeline);
  std::cout << "loss=" << g17(r.loss) << " acc=" << g17(r.accuracy) << '\n';
  return kExitOk;
}

int ablation(const AblationArgs& args) {
  const ExperimentPlan plan = experiment_plan_from_json(read_text(args.plan, "plan"));
  const auto rows = run_ablation_suite(plan, [](const std::string& name) {
    std::cerr << "running " << name << '\n';
  });
  const std::string table = format_ablation_table(rows);
  std::cout << table;
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    std::ofstream(fs::path(args.out) / "ablation.txt") << table;
  }
  return kExitOk;
}

int extract_features(const ExtractArgs& args) {
  if (args.stage != "x" && args.stage != "z" && args.stage != "q") {
    throw ConfigError("stage", "expected x, z or q, got '" + args.stage + "'");
  }
  LoadedCheckpoint ckpt = load_checkpoint(args.ckpt);
  FullModel& model = ckpt.model;
  const Pipeline pipeline = checkpoint_pipeline(ckpt);
  const FrontendConfig& fc = model.config().frontend;
  const WaveBuffer wave = read_wav(args.wav);
  if (wave.sample_rate != kPipelineSampleRate) {
    throw FormatError("wav: sample_rate must be 16000");
  }
  NoGradGuard no_grad;
  const Tensor frames = frame_signal(wave.samples, framing_for(fc));
  const std::size_t N = frames.dim(0);
  const Tensor spec = model.frontend().spectrogram_frames(frames).value();
  if (args.frame >= 0 && static_cast<std::size_t>(args.frame) >= N) {
    throw ConfigError("frame", "utterance has only " + std::to_string(N) + " frames");
  }

  if (args.stage == "x" && args.frame < 0) {
    write_features(args.out, spec);
    std::cout << "rows=" << spec.dim(0) << " cols=" << spec.dim(1) << '\n';
    return kExitOk;
  }

  // Later stages need the feedback chain, so frames run in order with the
  // model's own posteriors as feedback.
  const std::size_t last = args.frame >= 0 ? static_cast<std::size_t>(args.frame) : N - 1;
  Tensor out;
  Tensor prev_posterior;
  for (std::size_t t = 0; t <= last; ++t) {
    const Var e = t == 0 ? model.zero_feedback() : model.posterior_feedback(prev_posterior);
    const ModelTrace tr = model.forward(spectrogram_block(spec, t, fc.T), e, pipeline);
    prev_posterior = tr.posterior.value();
    const bool keep = args.frame < 0 || t == last;
    if (!keep) continue;
    if (args.frame >= 0) {
      if (args.stage == "x") out = tr.acoustic.x.value();
      if (args.stage == "z") out = tr.acoustic.z.value();
      if (args.stage == "q") {
        const Shape& s = tr.q.shape();
        out = tr.q.value().reshaped(Shape{s[0] * s[1], s[2]});
      }
      break;
    }
    if (args.stage == "z") {
      if (out.empty()) out = Tensor(Shape{fc.F, N});
      const Tensor& z = tr.acoustic.z.value();
      for (std::size_t f = 0; f < fc.F; ++f) out[f * N + t] = z[f * fc.T + fc.T / 2];
    } else {
      const Tensor& q = tr.q.value();
      if (out.empty()) out = Tensor(Shape{N, q.size()});
      std::copy(q.values().begin(), q.values().end(),
                out.values().begin() + static_cast<std::ptrdiff_t>(t * q.size()));
    }
  }
  write_features(args.out, out);
  std::cout << "rows=" << out.dim(0) << " cols=" << out.dim(1) << '\n';
  return kExitOk;
}

int export_filters(const ExportArgs& args) {
  LoadedCheckpoint ckpt = load_checkpoint(args.ckpt);
  const KernelBank& bank = ckpt.model.frontend().bank();
  const fs::path out(args.out);
  fs::create_directories(out);

  const std::vector<double> centers = bank.center_frequencies();
  {
    std::ofstream mu(out / "mu.txt");
    char line[128];
    for (std::size_t i = 0; i < centers.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu, %.9f, %.3f\n", i, centers[i],
                    centers[i] * kPipelineSampleRate);
      mu << line;
    }
  }

  Tensor kernels;
  {
    NoGradGuard no_grad;
    kernels = bank.kernels().value();
  }
  write_features(out / "impulse_responses.rwf", kernels);
  const std::size_t F = kernels.dim(0);
  const std::size_t L = kernels.dim(1);
  Tensor spectra(Shape{F, 513});
  for (std::size_t f = 0; f < F; ++f) {
    const auto mag = magnitude_spectrum(
        std::span<const double>(kernels.data() + f * L, L), 1024);
    std::copy(mag.begin(), mag.end(),
              spectra.values().begin() + static_cast<std::ptrdiff_t>(f * 513));
  }
  write_features(out / "spectra.rwf", spectra);

  const Tensor& mod = ckpt.model.modulation().kernels().value();
  const std::size_t K = mod.dim(0);
  const std::size_t kf = mod.dim(2);
  const std::size_t kt = mod.dim(3);
  for (std::size_t k = 0; k < K; ++k) {
    Tensor kernel(Shape{kf, kt});
    std::copy(mod.data() + k * kf * kt, mod.data() + (k + 1) * kf * kt,
              kernel.values().begin());
    char name[64];
    std::snprintf(name, sizeof name, "modulation_kernel_%03zu.rwf", k);
    write_features(out / name, kernel);
  }
  std::cout << "filters=" << F << " modulation_kernels=" << K << " out=" << args.out
            << '\n';
  return kExitOk;
}

int grad_check(const GradCheckArgs& args) {
  const ModelGradCheck report =
      model_grad_check(tiny_model_config(), args.seed, args.inject_bug);
  for (const ModuleGradReport& m : report.modules) {
    char line[160];
    std::snprintf(line, sizeof line, "module=%s coords=%zu max_rel_error=%.3e status=%s\n",
                  m.module.c_str(), m.coords, m.max_rel_error, m.pass ? "PASS" : "FAIL");
    std::cout << line;
  }
  char line[160];
  std::snprintf(line, sizeof line, "overall=%s max_rel_error=%.3e threshold=%.0e\n",
                report.pass ? "PASS" : "FAIL", report.max_rel_error, kGradCheckThreshold);
  std::cout << line;
  return report.pass ? kExitOk : kExitRuntime;
}

}  // namespace relfb::cli
