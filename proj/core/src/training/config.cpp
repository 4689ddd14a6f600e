#include "relfb/training/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "common/json_util.hpp"

namespace relfb {

using detail::json;

std::string_view to_string(EvalMode mode) {
  return mode == EvalMode::kTeacherForced ? "teacher" : "free";
}

EvalMode eval_mode_from_string(std::string_view name) {
  if (name == "teacher") return EvalMode::kTeacherForced;
  if (name == "free") return EvalMode::kFreeRunning;
  throw ConfigError("eval_mode",
                    "expected teacher or free, got '" + std::string(name) + "'");
}

bool is_known_group(std::string_view group) {
  if (group == "batch_norm") return true;
  return std::find(std::begin(kParameterGroups), std::end(kParameterGroups), group) !=
         std::end(kParameterGroups);
}

void TrainConfig::validate() const {
  if (train_data.empty()) throw ConfigError("data.train", "no training data given");
  if (batch_size < 2) {
    throw ConfigError("batch_size", "batch norm needs at least 2 examples per batch");
  }
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr", "must be positive");
  for (const std::string& g : freeze) {
    if (!is_known_group(g)) throw ConfigError("freeze", "unknown group '" + g + "'");
  }
  if (transfer) {
    if (transfer->source.empty()) throw ConfigError("transfer.source", "missing");
    for (const std::string& g : transfer->groups) {
      if (!is_known_group(g)) {
        throw ConfigError("transfer.groups", "unknown group '" + g + "'");
      }
    }
  }
  if (train_data.synthetic && train_data.synthetic->classes != model.vocab) {
    throw ConfigError("data.train.synthetic.classes",
                      "must equal model.vocab (" + std::to_string(model.vocab) + ")");
  }
}

namespace {

json data_json(const DataSource& d) {
  json j = json::object();
  if (!d.path.empty()) j["path"] = d.path;
  if (d.synthetic) j["synthetic"] = json::parse(synthetic_spec_to_json(*d.synthetic));
  j["seed"] = d.seed;
  return j;
}

DataSource parse_data(const json& j, const std::string& p) {
  detail::reject_unknown_keys(j, {"path", "synthetic", "seed"}, p);
  DataSource d;
  detail::read_string(j, "path", d.path, p);
  if (const auto it = j.find("synthetic"); it != j.end()) {
    try {
      d.synthetic = synthetic_spec_from_json(it->dump());
    } catch (const ConfigError& e) {
      throw ConfigError(detail::field_path(p + ".synthetic", e.field()), e.message());
    }
  }
  detail::read_u64(j, "seed", d.seed, p);
  if (!d.path.empty() && d.synthetic) {
    throw ConfigError(p, "give either path or synthetic, not both");
  }
  return d;
}

json optimizer_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

void parse_optimizer(const json& j, AdamConfig& a, const std::string& p) {
  detail::reject_unknown_keys(j, {"lr", "beta1", "beta2", "eps"}, p);
  detail::read_double(j, "lr", a.lr, p);
  detail::read_double(j, "beta1", a.beta1, p);
  detail::read_double(j, "beta2", a.beta2, p);
  detail::read_double(j, "eps", a.eps, p);
}

std::vector<std::string> read_string_list(const json& j, std::string_view key,
                                          std::vector<std::string> fallback,
                                          const std::string& p) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array()) throw ConfigError(detail::field_path(p, key), "expected an array");
  std::vector<std::string> out;
  for (const json& v : *it) {
    if (!v.is_string()) {
      throw ConfigError(detail::field_path(p, key), "expected strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& c) {
  json data = {{"train", data_json(c.train_data)}};
  if (c.eval_data) data["eval"] = data_json(*c.eval_data);
  json embedding = {{"pretrain", c.embedding.pretrain},
                    {"pretrain_epochs", c.embedding.pretrain_config.epochs},
                    {"pretrain_batch_size", c.embedding.pretrain_config.batch_size},
                    {"pretrain_lr", c.embedding.pretrain_config.optimizer.lr},
                    {"pretrain_seed", c.embedding.pretrain_config.seed}};
  if (!c.embedding.checkpoint.empty()) embedding["checkpoint"] = c.embedding.checkpoint;
  json j = {{"model", json::parse(model_config_to_json(c.model))},
            {"data", data},
            {"optimizer", optimizer_json(c.optimizer)},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"eval_mode", std::string(to_string(c.eval_mode))},
            {"freeze", c.freeze},
            {"pipeline", std::string(to_string(c.pipeline))},
            {"embedding", embedding}};
  if (c.transfer) {
    j["transfer"] = {{"source", c.transfer->source},
                     {"groups", c.transfer->groups},
                     {"freeze", c.transfer->freeze}};
  }
  return j.dump();
}

TrainConfig train_config_from_json(std::string_view text) {
  const json j = detail::parse_json_object(text, "config");
  detail::reject_unknown_keys(j,
                              {"model", "data", "optimizer", "batch_size", "epochs",
                               "seed", "eval_mode", "freeze", "pipeline",
                               "embedding", "transfer"},
                              "");
  TrainConfig c;
  if (const json* m = detail::sub_object(j, "model", "")) {
    try {
      c.model = model_config_from_json(m->dump());
    } catch (const ConfigError& e) {
      throw ConfigError(detail::field_path("model", e.field()), e.message());
    }
  }
  if (const json* d = detail::sub_object(j, "data", "")) {
    detail::reject_unknown_keys(*d, {"train", "eval"}, "data");
    if (const json* t = detail::sub_object(*d, "train", "data")) {
      c.train_data = parse_data(*t, "data.train");
    }
    if (const json* e = detail::sub_object(*d, "eval", "data")) {
      c.eval_data = parse_data(*e, "data.eval");
    }
  }
  if (const json* o = detail::sub_object(j, "optimizer", "")) {
    parse_optimizer(*o, c.optimizer, "optimizer");
  }
  detail::read_size(j, "batch_size", c.batch_size, "");
  detail::read_size(j, "epochs", c.epochs, "");
  detail::read_u64(j, "seed", c.seed, "");
  std::string mode(to_string(c.eval_mode));
  detail::read_string(j, "eval_mode", mode, "");
  c.eval_mode = eval_mode_from_string(mode);
  c.freeze = read_string_list(j, "freeze", c.freeze, "");
  std::string pipeline(to_string(c.pipeline));
  detail::read_string(j, "pipeline", pipeline, "");
  c.pipeline = pipeline_from_string(pipeline);
  if (const json* e = detail::sub_object(j, "embedding", "")) {
    detail::reject_unknown_keys(*e,
                                {"checkpoint", "pretrain", "pretrain_epochs",
                                 "pretrain_batch_size", "pretrain_lr",
                                 "pretrain_seed"},
                                "embedding");
    detail::read_string(*e, "checkpoint", c.embedding.checkpoint, "embedding");
    detail::read_bool(*e, "pretrain", c.embedding.pretrain, "embedding");
    PretrainConfig& pc = c.embedding.pretrain_config;
    detail::read_size(*e, "pretrain_epochs", pc.epochs, "embedding");
    detail::read_size(*e, "pretrain_batch_size", pc.batch_size, "embedding");
    detail::read_double(*e, "pretrain_lr", pc.optimizer.lr, "embedding");
    detail::read_u64(*e, "pretrain_seed", pc.seed, "embedding");
  }
  if (const json* t = detail::sub_object(j, "transfer", "")) {
    detail::reject_unknown_keys(*t, {"source", "groups", "freeze"}, "transfer");
    TransferSpec spec;
    detail::read_string(*t, "source", spec.source, "transfer");
    spec.groups = read_string_list(*t, "groups", spec.groups, "transfer");
    detail::read_bool(*t, "freeze", spec.freeze, "transfer");
    c.transfer = spec;
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return train_config_from_json(text.str());
}

TrainConfig apply_overrides(const TrainConfig& base, std::string_view patch_json) {
  json j = json::parse(train_config_to_json(base));
  json patch;
  try {
    patch = json::parse(patch_json);
  } catch (const json::parse_error& e) {
    throw ConfigError("overrides", std::string("invalid JSON: ") + e.what());
  }
  j.merge_patch(patch);
  return train_config_from_json(j.dump());
}

}  // namespace relfb
