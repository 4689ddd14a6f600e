#pragma once

#include <cstdint>
#include <string>

namespace relfb::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

struct SynthDataArgs {
  std::string spec;
  std::string out;
  std::uint64_t seed = 1;
};

struct PretrainArgs {
  std::string labels;
  std::string out;
  std::size_t dim = 200;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::size_t vocab = 0;  // 0: read from utterances.txt or max label + 1
  double lr = 1e-2;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string config;
  std::string embed;
  std::string out;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string mode = "teacher";
  std::string feedback = "model";
};

struct AblationArgs {
  std::string plan;
  std::string out;
};

struct ExtractArgs {
  std::string ckpt;
  std::string wav;
  std::string stage;
  std::string out;
  long frame = -1;
};

struct ExportArgs {
  std::string ckpt;
  std::string out;
};

struct GradCheckArgs {
  std::string scale = "tiny";
  std::uint64_t seed = 1;
  bool inject_bug = false;
};

int synth_data(const SynthDataArgs& args);
int pretrain_embed(const PretrainArgs& args);
int train(const TrainArgs& args);
int eval(const EvalArgs& args);
int ablation(const AblationArgs& args);
int extract_features(const ExtractArgs& args);
int export_filters(const ExportArgs& args);
int grad_check(const GradCheckArgs& args);

}  // namespace relfb::cli
