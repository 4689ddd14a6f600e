#include "relfb/training/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "common/json_util.hpp"
#include "relfb/model/checkpoint.hpp"
#include "relfb/numerics/adam.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {
namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t argmax(const Tensor& p) {
  return static_cast<std::size_t>(
      std::max_element(p.values().begin(), p.values().end()) - p.values().begin());
}

double frame_loss(const Tensor& posterior, std::size_t target) {
  return -std::log(std::max(posterior[target], kLogFloor));
}

Tensor one_hot(std::size_t index, std::size_t size) {
  Tensor t(Shape{size}, 0.0);
  t[index] = 1.0;
  return t;
}

bool needs_embedding(const TrainConfig& config) {
  return config.pipeline == Pipeline::kFull && config.model.uses_embedding();
}

}  // namespace

Var spectrogram_block(const Tensor& spectrogram, std::size_t center,
                      std::size_t context) {
  const std::size_t F = spectrogram.dim(0);
  const std::size_t N = spectrogram.dim(1);
  Tensor x(Shape{F, context});
  for (std::size_t r = 0; r < context; ++r) {
    const std::size_t j = block_frame_index(center, r, context, N);
    for (std::size_t f = 0; f < F; ++f) x[f * context + r] = spectrogram[f * N + j];
  }
  return Var::constant(std::move(x));
}

std::string MetricsLog::csv() const {
  std::string out = "epoch,train_loss,train_acc,eval_loss,eval_acc\n";
  for (const EpochMetrics& r : rows_) {
    out += std::to_string(r.epoch) + "," + fmt17(r.train_loss) + "," +
           fmt17(r.train_acc) + ",";
    if (r.has_eval) out += fmt17(r.eval_loss) + "," + fmt17(r.eval_acc);
    else out += ",";
    out += "\n";
  }
  return out;
}

std::string MetricsLog::timing_csv() const {
  std::string out = "epoch,seconds\n";
  for (const EpochMetrics& r : rows_) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
    out += std::to_string(r.epoch) + "," + buf + "\n";
  }
  return out;
}

void MetricsLog::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "metrics.csv") << csv();
  std::ofstream(dir / "timing.csv") << timing_csv();
}

std::vector<Tensor> utterance_posteriors(FullModel& model,
                                         const PreparedUtterance& utterance,
                                         EvalMode mode, FeedbackSource feedback,
                                         Pipeline pipeline) {
  NoGradGuard no_grad;
  const std::size_t N = utterance.labels.size();
  const std::size_t T = model.config().frontend.T;
  const Tensor spec = model.frontend().spectrogram_frames(utterance.frames).value();
  std::vector<Tensor> out;
  out.reserve(N);
  for (std::size_t t = 0; t < N; ++t) {
    Var e_prev = model.zero_feedback();
    if (t > 0) {
      if (mode == EvalMode::kTeacherForced) {
        e_prev = model.label_feedback(utterance.labels[t - 1]);
      } else if (feedback == FeedbackSource::kGroundTruthOneHot) {
        e_prev = model.posterior_feedback(
            one_hot(utterance.labels[t - 1], model.config().vocab));
      } else {
        e_prev = model.posterior_feedback(out.back());
      }
    }
    out.push_back(model.forward(spectrogram_block(spec, t, T), e_prev, pipeline)
                      .posterior.value());
  }
  return out;
}

EvalResult evaluate(FullModel& model, const Dataset& data, EvalMode mode,
                    FeedbackSource feedback, Pipeline pipeline) {
  EvalResult result;
  double loss = 0.0;
  std::size_t correct = 0;
  for (const PreparedUtterance& u : data.utterances) {
    const auto posteriors = utterance_posteriors(model, u, mode, feedback, pipeline);
    for (std::size_t t = 0; t < posteriors.size(); ++t) {
      loss += frame_loss(posteriors[t], u.labels[t]);
      correct += argmax(posteriors[t]) == u.labels[t] ? 1 : 0;
    }
    result.frames += posteriors.size();
  }
  if (result.frames > 0) {
    result.loss = loss / static_cast<double>(result.frames);
    result.accuracy =
        static_cast<double>(correct) / static_cast<double>(result.frames);
  }
  return result;
}

void apply_freeze(FullModel& model, const std::vector<std::string>& groups) {
  for (const std::string& g : groups) {
    if (!is_known_group(g)) throw ConfigError("freeze", "unknown group '" + g + "'");
    if (g == "batch_norm") {
      model.batch_norm_state().update_running = false;
      continue;
    }
    for (Parameter* p : model.parameters_in_group(g)) p->set_trainable(false);
  }
}

FullModel transfer_filters(const FullModel& source, const TrainConfig& target) {
  const FrontendConfig& s = source.config().frontend;
  const FrontendConfig& t = target.model.frontend;
  if (s.kernel != t.kernel) {
    throw ConfigError("transfer", "kernel family differs between source and target");
  }
  if (s.F != t.F) {
    throw ConfigError("transfer", "source has F=" + std::to_string(s.F) +
                                      ", target F=" + std::to_string(t.F));
  }
  if (s.L != t.L) {
    throw ConfigError("transfer", "source has L=" + std::to_string(s.L) +
                                      ", target L=" + std::to_string(t.L));
  }
  FullModel model(target.model, target.seed);
  const std::vector<std::string> groups =
      target.transfer ? target.transfer->groups : std::vector<std::string>{"mu"};
  for (const std::string& g : groups) {
    if (g == "batch_norm") {
      model.batch_norm_state().running_mean = source.batch_norm_state().running_mean;
      model.batch_norm_state().running_var = source.batch_norm_state().running_var;
      continue;
    }
    if (g == "embedding" && source.has_embedding()) model.set_embedding(*source.embedding());
    for (Parameter* p : model.parameters_in_group(g)) {
      const Parameter* from = source.find_parameter(p->name());
      if (from == nullptr || from->value().shape() != p->value().shape()) {
        throw ConfigError("transfer", "source has no parameter matching " + p->name());
      }
      p->value() = from->value();
    }
  }
  return model;
}

TrainResult train(const TrainConfig& config, const TrainInputs& inputs,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (inputs.train == nullptr || inputs.train->blocks() == 0) {
    throw ConfigError("data.train", "training set is empty");
  }
  const Dataset& data = *inputs.train;
  if (data.vocab != config.model.vocab) {
    throw ConfigError("vocab", "dataset has " + std::to_string(data.vocab) +
                                   " classes, model " +
                                   std::to_string(config.model.vocab));
  }

  TrainResult result{inputs.transfer_source
                         ? transfer_filters(*inputs.transfer_source, config)
                         : FullModel(config.model, config.seed),
                     MetricsLog{}, 0};
  FullModel& model = result.model;
  if (inputs.embedding) model.set_embedding(*inputs.embedding);
  if (needs_embedding(config) && !model.has_embedding()) {
    throw ConfigError("embedding_checkpoint",
                      "model uses embedding feedback but no embedding was supplied");
  }
  apply_freeze(model, config.freeze);
  if (config.transfer && config.transfer->freeze) {
    apply_freeze(model, config.transfer->groups);
  }

  struct BlockRef {
    std::size_t utt;
    std::size_t frame;
  };
  std::vector<BlockRef> order;
  order.reserve(data.blocks());
  for (std::size_t u = 0; u < data.utterances.size(); ++u) {
    for (std::size_t t = 0; t < data.utterances[u].labels.size(); ++t) {
      order.push_back({u, t});
    }
  }

  const std::size_t T = config.model.frontend.T;
  Adam adam(config.optimizer);
  Rng shuffle = Rng::substream(config.seed, "shuffle");
  const std::vector<Parameter*> params = model.parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle.shuffle(std::span<BlockRef>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i + 1 < order.size(); i += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - i);
      std::vector<Var> xs, es;
      std::vector<std::size_t> targets;
      xs.reserve(n);
      es.reserve(n);
      targets.reserve(n);
      for (std::size_t b = 0; b < n; ++b) {
        const PreparedUtterance& u = data.utterances[order[i + b].utt];
        const std::size_t t = order[i + b].frame;
        xs.push_back(model.spectrogram(assemble_block(u.frames, t, T)));
        es.push_back(t > 0 ? model.label_feedback(u.labels[t - 1])
                           : model.zero_feedback());
        targets.push_back(u.labels[t]);
      }
      const auto traces =
          model.forward_batch(xs, es, BatchNormMode::kTrain, config.pipeline);
      std::vector<Var> posteriors;
      posteriors.reserve(n);
      for (const ModelTrace& tr : traces) posteriors.push_back(tr.posterior);
      const Var loss = cross_entropy(stack(posteriors), targets);

      zero_grads(params);
      if (loss.track_grad()) backward(loss);
      adam.step(params);
      model.post_step();
      ++result.steps;

      loss_sum += loss.value()[0] * static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) {
        correct += argmax(traces[b].posterior.value()) == targets[b] ? 1 : 0;
      }
      seen += n;
    }

    EpochMetrics row;
    row.epoch = epoch + 1;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    if (inputs.eval) {
      const EvalResult ev =
          evaluate(model, *inputs.eval, config.eval_mode,
                   FeedbackSource::kModelPosterior, config.pipeline);
      row.eval_loss = ev.loss;
      row.eval_acc = ev.accuracy;
      row.has_eval = true;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    result.log.append(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

std::optional<EmbeddingNet> resolve_embedding(const TrainConfig& config,
                                              const Dataset& train_data) {
  if (!needs_embedding(config)) return std::nullopt;
  if (!config.embedding.checkpoint.empty()) {
    return load_embedding_checkpoint(config.embedding.checkpoint);
  }
  if (config.embedding.pretrain) {
    const auto sequences = train_data.label_sequences();
    return pretrain_embeddings(sequences, config.model.vocab, config.model.embed_dim,
                               config.embedding.pretrain_config)
        .net;
  }
  throw ConfigError("embedding_checkpoint",
                    "the model consumes an embedding; give a checkpoint or enable pretrain");
}

namespace {

TrainResult run_with_source(const TrainConfig& config, const FullModel* source,
                            const EpochCallback& on_epoch) {
  const Dataset train_data = load_dataset(config.train_data, config.model);
  std::optional<Dataset> eval_data;
  if (config.eval_data) eval_data = load_dataset(*config.eval_data, config.model);
  const std::optional<EmbeddingNet> embedding = resolve_embedding(config, train_data);
  TrainInputs inputs;
  inputs.train = &train_data;
  inputs.eval = eval_data ? &*eval_data : nullptr;
  inputs.embedding = embedding ? &*embedding : nullptr;
  inputs.transfer_source = source;
  return train(config, inputs, on_epoch);
}

}  // namespace

TrainResult run_training(const TrainConfig& config, const EpochCallback& on_epoch) {
  if (config.transfer) {
    LoadedCheckpoint source = load_checkpoint(config.transfer->source);
    return run_with_source(config, &source.model, on_epoch);
  }
  return run_with_source(config, nullptr, on_epoch);
}

void ExperimentPlan::validate() const {
  std::set<std::string> names;
  for (const PlanRow& row : rows) {
    if (row.name.empty()) throw ConfigError("rows.name", "empty row name");
    if (!names.insert(row.name).second) {
      throw ConfigError("rows.name", "duplicate row name '" + row.name + "'");
    }
  }
}

ExperimentPlan standard_ablation_plan(const TrainConfig& base) {
  ExperimentPlan plan;
  TrainConfig am = base;
  am.model.flags = {false, false, false};
  plan.rows.push_back({"(A,M)", am});
  for (const bool modulation : {false, true}) {
    const std::string stage = modulation ? "A-R,M-R" : "A-R,M";
    for (const RelevanceOutput output :
         {RelevanceOutput::kSoftmax, RelevanceOutput::kSigmoid}) {
      for (const bool embedding : {false, true}) {
        TrainConfig c = base;
        c.model.flags = {true, modulation, embedding};
        c.model.frontend.relevance_output = output;
        c.model.modulation.relevance_output = output;
        const std::string name =
            stage + " [" +
            (output == RelevanceOutput::kSoftmax ? "Softmax" : "Sigmoid") + ", " +
            (embedding ? "with embedding" : "no embedding") + "]";
        plan.rows.push_back({name, c});
      }
    }
  }
  return plan;
}

ExperimentPlan experiment_plan_from_json(std::string_view text) {
  using detail::json;
  const json j = detail::parse_json_object(text, "plan");
  detail::reject_unknown_keys(j, {"base", "rows"}, "");
  const json* base_json = detail::sub_object(j, "base", "");
  if (base_json == nullptr) throw ConfigError("base", "missing base config");
  const TrainConfig base = train_config_from_json(base_json->dump());
  const auto rows = j.find("rows");
  if (rows == j.end() || (rows->is_string() && *rows == "standard")) {
    ExperimentPlan plan = standard_ablation_plan(base);
    plan.validate();
    return plan;
  }
  if (!rows->is_array()) throw ConfigError("rows", "expected \"standard\" or an array");
  ExperimentPlan plan;
  for (const json& row : *rows) {
    if (!row.is_object()) throw ConfigError("rows", "expected objects");
    detail::reject_unknown_keys(row, {"name", "overrides"}, "rows");
    std::string name;
    detail::read_string(row, "name", name, "rows");
    const auto overrides = row.find("overrides");
    plan.rows.push_back(
        {name, overrides == row.end() ? base : apply_overrides(base, overrides->dump())});
  }
  plan.validate();
  return plan;
}

std::vector<AblationRow> run_ablation_suite(
    const ExperimentPlan& plan,
    const std::function<void(const std::string&)>& on_row_start) {
  plan.validate();
  std::vector<AblationRow> out;
  std::map<std::string, FullModel> trained;
  for (const PlanRow& row : plan.rows) {
    if (on_row_start) on_row_start(row.name);
    const FullModel* source = nullptr;
    std::optional<LoadedCheckpoint> loaded;
    if (row.config.transfer) {
      const auto it = trained.find(row.config.transfer->source);
      if (it != trained.end()) {
        source = &it->second;
      } else {
        loaded.emplace(load_checkpoint(row.config.transfer->source));
        source = &loaded->model;
      }
    }
    TrainResult result = run_with_source(row.config, source, {});
    out.push_back({row.name, result.log.empty() ? EpochMetrics{} : result.log.last()});
    trained.emplace(row.name, std::move(result.model));
  }
  return out;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t width = std::string("configuration").size();
  for (const AblationRow& r : rows) width = std::max(width, r.name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  char buf[160];
  std::string out = pad("configuration", width);
  std::snprintf(buf, sizeof buf, "  %10s  %9s  %10s  %9s\n", "train_loss", "train_acc",
                "eval_loss", "eval_acc");
  out += buf;
  for (const AblationRow& r : rows) {
    out += pad(r.name, width);
    if (r.final.has_eval) {
      std::snprintf(buf, sizeof buf, "  %10.6f  %9.4f  %10.6f  %9.4f\n",
                    r.final.train_loss, r.final.train_acc, r.final.eval_loss,
                    r.final.eval_acc);
    } else {
      std::snprintf(buf, sizeof buf, "  %10.6f  %9.4f  %10s  %9s\n", r.final.train_loss,
                    r.final.train_acc, "-", "-");
    }
    out += buf;
  }
  return out;
}

}  // namespace relfb
