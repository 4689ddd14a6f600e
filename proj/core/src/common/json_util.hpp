#pragma once

// Helpers for reading config objects with field-named errors.

#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "relfb/numerics/errors.hpp"

namespace relfb::detail {

using nlohmann::json;

inline json parse_json_object(std::string_view text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError(what, "expected a JSON object");
  return j;
}

inline std::string field_path(const std::string& prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

inline void reject_unknown_keys(const json& obj,
                                std::initializer_list<std::string_view> allowed,
                                const std::string& prefix) {
  if (!obj.is_object()) throw ConfigError(prefix, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view k : allowed) known = known || item.key() == k;
    if (!known) throw ConfigError(field_path(prefix, item.key()), "unknown field");
  }
}

inline void read_size(const json& obj, std::string_view key, std::size_t& out,
                      const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) {
    throw ConfigError(field_path(prefix, key), "expected a non-negative integer");
  }
  out = it->get<std::size_t>();
}

inline void read_u64(const json& obj, std::string_view key, std::uint64_t& out,
                     const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) {
    throw ConfigError(field_path(prefix, key), "expected a non-negative integer");
  }
  out = it->get<std::uint64_t>();
}

inline void read_double(const json& obj, std::string_view key, double& out,
                        const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) throw ConfigError(field_path(prefix, key), "expected a number");
  out = it->get<double>();
}

inline void read_bool(const json& obj, std::string_view key, bool& out,
                      const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_boolean()) throw ConfigError(field_path(prefix, key), "expected a boolean");
  out = it->get<bool>();
}

inline void read_string(const json& obj, std::string_view key, std::string& out,
                        const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_string()) throw ConfigError(field_path(prefix, key), "expected a string");
  out = it->get<std::string>();
}

inline void read_size_list(const json& obj, std::string_view key,
                           std::vector<std::size_t>& out,
                           const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_array()) throw ConfigError(field_path(prefix, key), "expected an array");
  out.clear();
  for (const json& v : *it) {
    if (!v.is_number_unsigned()) {
      throw ConfigError(field_path(prefix, key), "expected non-negative integers");
    }
    out.push_back(v.get<std::size_t>());
  }
}

inline void read_pair(const json& obj, std::string_view key, std::size_t& a,
                      std::size_t& b, const std::string& prefix) {
  std::vector<std::size_t> v{a, b};
  read_size_list(obj, key, v, prefix);
  if (v.size() != 2) throw ConfigError(field_path(prefix, key), "expected [a, b]");
  a = v[0];
  b = v[1];
}

inline const json* sub_object(const json& obj, std::string_view key,
                              const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(field_path(prefix, key), "expected an object");
  return &*it;
}

}  // namespace relfb::detail
