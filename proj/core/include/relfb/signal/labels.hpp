#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace relfb {

struct UtteranceLabels {
  std::vector<std::int32_t> senone_ids;  // one per frame
  std::size_t vocab_size = 0;

  /// Throws ConfigError if any id is outside [0, vocab_size).
  void validate() const;
};

/// One decimal id per line; blank lines are ignored.
std::vector<std::int32_t> read_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path,
                      const std::vector<std::int32_t>& ids);

}  // namespace relfb
