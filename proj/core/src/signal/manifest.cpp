#include "relfb/signal/manifest.hpp"

#include <fstream>

#include "relfb/numerics/errors.hpp"

namespace relfb {

void write_manifest(const std::filesystem::path& path, const Manifest& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [key, value] : entries) {
    if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw FormatError("manifest: key '" + key + "' is not a single-line entry");
    }
    out << key << '=' << value << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Manifest entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return entries;
}

const std::string& manifest_value(const Manifest& manifest,
                                  const std::string& key) {
  const auto it = manifest.find(key);
  if (it == manifest.end()) throw FormatError("manifest: missing key '" + key + "'");
  return it->second;
}

}  // namespace relfb
