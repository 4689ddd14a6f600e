#include "relfb/signal/labels.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include "relfb/numerics/errors.hpp"

namespace relfb {

void UtteranceLabels::validate() const {
  for (std::int32_t id : senone_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw ConfigError("senone_id", std::to_string(id) +
                                         " outside vocabulary of size " +
                                         std::to_string(vocab_size));
    }
  }
}

std::vector<std::int32_t> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label file " + path.string());
  std::vector<std::int32_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::int32_t value = 0;
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": not an integer senone id");
    }
    ids.push_back(value);
  }
  return ids;
}

void write_label_file(const std::filesystem::path& path,
                      const std::vector<std::int32_t>& ids) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write label file " + path.string());
  for (std::int32_t id : ids) out << id << '\n';
}

}  // namespace relfb
