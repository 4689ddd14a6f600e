#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace relfb {

/// Text file of `key=value` lines. Blank lines and lines starting with '#'
/// are skipped; the value runs to the end of the line.
using Manifest = std::map<std::string, std::string>;

void write_manifest(const std::filesystem::path& path, const Manifest& entries);
Manifest read_manifest(const std::filesystem::path& path);

/// Value for `key`; throws FormatError naming the key if absent.
const std::string& manifest_value(const Manifest& manifest,
                                  const std::string& key);

}  // namespace relfb
