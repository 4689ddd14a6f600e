#include <cstdio>

#include "common/json_util.hpp"
#include "relfb/model/model.hpp"
#include "relfb/numerics/rng.hpp"

namespace relfb {

using detail::json;

namespace {

json frontend_json(const FrontendConfig& c) {
  return {{"kernel", std::string(to_string(c.kernel))},
          {"F", c.F},
          {"L", c.L},
          {"S", c.S},
          {"shift", c.shift},
          {"T", c.T},
          {"relevance_output", std::string(to_string(c.relevance_output))},
          {"embed_proj_dim", c.embed_proj_dim},
          {"relevance_hidden", c.relevance_hidden},
          {"log_floor", c.log_floor},
          {"norm_eps", c.norm_eps},
          {"norm_affine", c.norm_affine}};
}

json modulation_json(const ModulationConfig& c) {
  return {{"K", c.K},
          {"kernel", {c.kf, c.kt}},
          {"pool", {c.pool_f, c.pool_t}},
          {"relevance_output", std::string(to_string(c.relevance_output))},
          {"embed_proj_dim", c.embed_proj_dim},
          {"relevance_hidden", c.relevance_hidden},
          {"bn_eps", c.bn_eps},
          {"bn_momentum", c.bn_momentum}};
}

json backend_json(const BackendConfig& c) {
  return {{"conv_layers", c.conv_layers},
          {"channels", c.channels},
          {"kernel", {c.kernel_h, c.kernel_w}},
          {"pool", {c.pool_h, c.pool_w}},
          {"dense", c.dense}};
}

void parse_frontend(const json& j, FrontendConfig& c, const std::string& p) {
  detail::reject_unknown_keys(j,
                              {"kernel", "F", "L", "S", "shift", "T",
                               "relevance_output", "embed_proj_dim",
                               "relevance_hidden", "log_floor", "norm_eps",
                               "norm_affine"},
                              p);
  std::string kernel(to_string(c.kernel));
  detail::read_string(j, "kernel", kernel, p);
  c.kernel = kernel_family_from_string(kernel);
  detail::read_size(j, "F", c.F, p);
  detail::read_size(j, "L", c.L, p);
  detail::read_size(j, "S", c.S, p);
  detail::read_size(j, "shift", c.shift, p);
  detail::read_size(j, "T", c.T, p);
  std::string output(to_string(c.relevance_output));
  detail::read_string(j, "relevance_output", output, p);
  c.relevance_output = relevance_output_from_string(output);
  detail::read_size(j, "embed_proj_dim", c.embed_proj_dim, p);
  detail::read_size(j, "relevance_hidden", c.relevance_hidden, p);
  detail::read_double(j, "log_floor", c.log_floor, p);
  detail::read_double(j, "norm_eps", c.norm_eps, p);
  detail::read_bool(j, "norm_affine", c.norm_affine, p);
}

void parse_modulation(const json& j, ModulationConfig& c, const std::string& p) {
  detail::reject_unknown_keys(j,
                              {"K", "kernel", "pool", "relevance_output",
                               "embed_proj_dim", "relevance_hidden", "bn_eps",
                               "bn_momentum"},
                              p);
  detail::read_size(j, "K", c.K, p);
  detail::read_pair(j, "kernel", c.kf, c.kt, p);
  detail::read_pair(j, "pool", c.pool_f, c.pool_t, p);
  std::string output(to_string(c.relevance_output));
  detail::read_string(j, "relevance_output", output, p);
  c.relevance_output = relevance_output_from_string(output);
  detail::read_size(j, "embed_proj_dim", c.embed_proj_dim, p);
  detail::read_size(j, "relevance_hidden", c.relevance_hidden, p);
  detail::read_double(j, "bn_eps", c.bn_eps, p);
  detail::read_double(j, "bn_momentum", c.bn_momentum, p);
}

void parse_backend(const json& j, BackendConfig& c, const std::string& p) {
  detail::reject_unknown_keys(j, {"conv_layers", "channels", "kernel", "pool", "dense"},
                              p);
  detail::read_size(j, "conv_layers", c.conv_layers, p);
  detail::read_size(j, "channels", c.channels, p);
  detail::read_pair(j, "kernel", c.kernel_h, c.kernel_w, p);
  detail::read_pair(j, "pool", c.pool_h, c.pool_w, p);
  detail::read_size_list(j, "dense", c.dense, p);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  const json j = {{"frontend", frontend_json(config.frontend)},
                  {"modulation", modulation_json(config.modulation)},
                  {"backend", backend_json(config.backend)},
                  {"flags",
                   {{"acoustic_relevance", config.flags.acoustic_relevance},
                    {"modulation_relevance", config.flags.modulation_relevance},
                    {"use_embedding", config.flags.use_embedding}}},
                  {"vocab", config.vocab},
                  {"embed_dim", config.embed_dim}};
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  const json j = detail::parse_json_object(text, "model");
  ModelConfig c;
  detail::reject_unknown_keys(
      j, {"frontend", "modulation", "backend", "flags", "vocab", "embed_dim"}, "");
  if (const json* f = detail::sub_object(j, "frontend", "")) {
    parse_frontend(*f, c.frontend, "frontend");
  }
  if (const json* m = detail::sub_object(j, "modulation", "")) {
    parse_modulation(*m, c.modulation, "modulation");
  }
  if (const json* b = detail::sub_object(j, "backend", "")) {
    parse_backend(*b, c.backend, "backend");
  }
  if (const json* f = detail::sub_object(j, "flags", "")) {
    detail::reject_unknown_keys(
        *f, {"acoustic_relevance", "modulation_relevance", "use_embedding"}, "flags");
    detail::read_bool(*f, "acoustic_relevance", c.flags.acoustic_relevance, "flags");
    detail::read_bool(*f, "modulation_relevance", c.flags.modulation_relevance,
                      "flags");
    detail::read_bool(*f, "use_embedding", c.flags.use_embedding, "flags");
  }
  detail::read_size(j, "vocab", c.vocab, "");
  detail::read_size(j, "embed_dim", c.embed_dim, "");
  return c;
}

std::string config_hash(const ModelConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(model_config_to_json(config))));
  return buf;
}

}  // namespace relfb
