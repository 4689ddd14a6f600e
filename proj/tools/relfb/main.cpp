#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "relfb/numerics/errors.hpp"

namespace cli = relfb::cli;

int main(int argc, char** argv) {
  CLI::App app{"relfb: learnable filterbank front-end with relevance weighting"};
  app.require_subcommand(1);

  cli::SynthDataArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic labelled corpus");
  synth_cmd->add_option("--spec", synth.spec, "Synthetic dataset spec (JSON file)")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  cli::PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain-embed", "Pre-train the senone embedding");
  pre_cmd->add_option("--labels", pre.labels, "Directory of .lab files")->required();
  pre_cmd->add_option("--out", pre.out, "Embedding checkpoint directory")->required();
  pre_cmd->add_option("--dim", pre.dim, "Embedding dimension")->capture_default_str();
  pre_cmd->add_option("--epochs", pre.epochs, "Training epochs")->capture_default_str();
  pre_cmd->add_option("--batch-size", pre.batch_size, "Positions per batch")
      ->capture_default_str();
  pre_cmd->add_option("--vocab", pre.vocab,
                      "Number of senones (0: from utterances.txt or labels)")
      ->capture_default_str();
  pre_cmd->add_option("--lr", pre.lr, "Adam learning rate")->capture_default_str();
  pre_cmd->add_option("--seed", pre.seed, "Random seed")->capture_default_str();

  cli::TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the acoustic model");
  train_cmd->add_option("--config", tr.config, "Training config (JSON file)")->required();
  train_cmd->add_option("--embed", tr.embed,
                        "Embedding checkpoint (overrides embedding.checkpoint)");
  train_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();

  cli::EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Utterance directory")->required();
  eval_cmd->add_option("--mode", ev.mode, "teacher or free")
      ->check(CLI::IsMember({"teacher", "free"}))
      ->capture_default_str();
  eval_cmd->add_option("--feedback", ev.feedback,
                       "Free-running feedback: model posteriors or ground-truth one-hots")
      ->check(CLI::IsMember({"model", "onehot"}))
      ->capture_default_str();

  cli::AblationArgs ab;
  auto* ab_cmd = app.add_subcommand("ablation", "Run an experiment plan");
  ab_cmd->add_option("--plan", ab.plan, "Experiment plan (JSON file)")->required();
  ab_cmd->add_option("--out", ab.out, "Directory for ablation.txt");

  cli::ExtractArgs ex;
  auto* ex_cmd = app.add_subcommand("extract-features", "Dump x, z or q for a WAV file");
  ex_cmd->add_option("--ckpt", ex.ckpt, "Checkpoint directory")->required();
  ex_cmd->add_option("--wav", ex.wav, "16 kHz mono PCM16 WAV")->required();
  ex_cmd->add_option("--stage", ex.stage, "x, z or q")->required();
  ex_cmd->add_option("--out", ex.out, "Output feature file")->required();
  ex_cmd->add_option("--frame", ex.frame,
                     "Dump the whole block around this frame (-1: one column per frame)")
      ->capture_default_str();

  cli::ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-filters", "Export learned filters");
  exp_cmd->add_option("--ckpt", exp.ckpt, "Checkpoint directory")->required();
  exp_cmd->add_option("--out", exp.out, "Output directory")->required();

  cli::GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient check");
  gc_cmd->add_option("--scale", gc.scale, "Model scale")
      ->check(CLI::IsMember({"tiny"}))
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gc_cmd->add_flag("--inject-bug", gc.inject_bug,
                   "Corrupt analytic gradients to confirm the check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    if (*synth_cmd) return cli::synth_data(synth);
    if (*pre_cmd) return cli::pretrain_embed(pre);
    if (*train_cmd) return cli::train(tr);
    if (*eval_cmd) return cli::eval(ev);
    if (*ab_cmd) return cli::ablation(ab);
    if (*ex_cmd) return cli::extract_features(ex);
    if (*exp_cmd) return cli::export_filters(exp);
    if (*gc_cmd) return cli::grad_check(gc);
  } catch (const relfb::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
  return cli::kExitUsage;
}
