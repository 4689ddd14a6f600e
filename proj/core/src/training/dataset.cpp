#include "relfb/training/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "relfb/numerics/errors.hpp"
#include "relfb/signal/labels.hpp"
#include "relfb/signal/wav.hpp"

namespace relfb {

std::size_t Dataset::blocks() const {
  std::size_t n = 0;
  for (const PreparedUtterance& u : utterances) n += u.labels.size();
  return n;
}

std::vector<LabelSequence> Dataset::label_sequences() const {
  std::vector<LabelSequence> out;
  out.reserve(utterances.size());
  for (const PreparedUtterance& u : utterances) {
    out.emplace_back(u.labels.begin(), u.labels.end());
  }
  return out;
}

FramingConfig framing_for(const FrontendConfig& frontend) {
  return FramingConfig{frontend.S, frontend.shift, frontend.T};
}

Dataset prepare_dataset(const std::vector<Utterance>& utterances,
                        const FramingConfig& framing, std::size_t vocab) {
  framing.validate();
  Dataset out;
  out.vocab = vocab;
  for (const Utterance& u : utterances) {
    if (u.wave.sample_rate != kPipelineSampleRate) {
      throw FormatError(u.id + ": sample rate " + std::to_string(u.wave.sample_rate) +
                        " (pipeline runs at 16000 Hz)");
    }
    PreparedUtterance p;
    p.id = u.id;
    p.frames = frame_signal(u.wave.samples, framing);
    if (u.labels.senone_ids.size() != p.frames.dim(0)) {
      throw FormatError(u.id + ": " + std::to_string(u.labels.senone_ids.size()) +
                        " labels for " + std::to_string(p.frames.dim(0)) + " frames");
    }
    for (std::int32_t h : u.labels.senone_ids) {
      if (h < 0 || static_cast<std::size_t>(h) >= vocab) {
        throw FormatError(u.id + ": senone " + std::to_string(h) +
                          " outside [0, " + std::to_string(vocab) + ")");
      }
      p.labels.push_back(static_cast<std::size_t>(h));
    }
    out.utterances.push_back(std::move(p));
  }
  return out;
}

void write_utterance_dir(const std::filesystem::path& dir,
                         const std::vector<Utterance>& utterances,
                         std::size_t vocab) {
  std::filesystem::create_directories(dir);
  std::ofstream list(dir / kUtteranceList);
  if (!list) throw std::runtime_error("cannot write " + (dir / kUtteranceList).string());
  list << "vocab " << vocab << '\n';
  for (const Utterance& u : utterances) {
    write_wav(dir / (u.id + ".wav"), u.wave);
    write_label_file(dir / (u.id + ".lab"), u.labels.senone_ids);
    list << u.id << ' ' << u.labels.senone_ids.size() << '\n';
  }
  if (!list) throw std::runtime_error("write failed for " + (dir / kUtteranceList).string());
}

namespace {

struct ListEntry {
  std::string id;
  std::size_t frames;
};

std::vector<ListEntry> read_list(const std::filesystem::path& path,
                                 std::size_t& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::vector<ListEntry> out;
  bool have_vocab = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string key;
    std::size_t value = 0;
    if (!(fields >> key >> value)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected '<name> <count>'");
    }
    if (key == "vocab" && !have_vocab) {
      vocab = value;
      have_vocab = true;
    } else {
      out.push_back({key, value});
    }
  }
  if (!have_vocab) throw FormatError(path.string() + ": missing vocab line");
  return out;
}

}  // namespace

std::vector<Utterance> read_utterance_dir(const std::filesystem::path& dir) {
  std::size_t vocab = 0;
  const auto entries = read_list(dir / kUtteranceList, vocab);
  std::vector<Utterance> out;
  for (const ListEntry& e : entries) {
    Utterance u;
    u.id = e.id;
    u.wave = read_wav(dir / (e.id + ".wav"));
    u.labels.senone_ids = read_label_file(dir / (e.id + ".lab"));
    u.labels.vocab_size = vocab;
    if (u.labels.senone_ids.size() != e.frames) {
      throw FormatError(e.id + ".lab: " + std::to_string(u.labels.senone_ids.size()) +
                        " labels, list says " + std::to_string(e.frames));
    }
    u.labels.validate();
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<LabelSequence> read_label_dir(const std::filesystem::path& dir) {
  std::vector<LabelSequence> out;
  if (std::filesystem::exists(dir / kUtteranceList)) {
    std::size_t vocab = 0;
    for (const ListEntry& e : read_list(dir / kUtteranceList, vocab)) {
      out.push_back(read_label_file(dir / (e.id + ".lab")));
    }
    return out;
  }
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".lab") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(read_label_file(f));
  return out;
}

std::optional<std::size_t> utterance_dir_vocab(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / kUtteranceList)) return std::nullopt;
  std::size_t vocab = 0;
  read_list(dir / kUtteranceList, vocab);
  return vocab;
}

Dataset load_dataset(const DataSource& source, const ModelConfig& model) {
  const FramingConfig framing = framing_for(model.frontend);
  if (source.synthetic) {
    SyntheticSpec spec = *source.synthetic;
    spec.frame_length = framing.frame_length;
    spec.frame_shift = framing.shift;
    return prepare_dataset(synth_classification_dataset(spec, source.seed), framing,
                           model.vocab);
  }
  if (source.path.empty()) throw ConfigError("data", "no data source given");
  return prepare_dataset(read_utterance_dir(source.path), framing, model.vocab);
}

}  // namespace relfb
