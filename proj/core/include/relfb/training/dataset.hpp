#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relfb/embedding/embedding.hpp"
#include "relfb/signal/framing.hpp"
#include "relfb/signal/synth.hpp"
#include "relfb/training/config.hpp"

namespace relfb {

/// One utterance cut into frames, with one senone label per frame.
struct PreparedUtterance {
  std::string id;
  Tensor frames;  // [N,S]
  std::vector<std::size_t> labels;
};

struct Dataset {
  std::vector<PreparedUtterance> utterances;
  std::size_t vocab = 0;

  /// Total number of labelled frames (one block per frame).
  std::size_t blocks() const;
  std::vector<LabelSequence> label_sequences() const;
};

/// Frames every utterance; the label count must equal the frame count.
Dataset prepare_dataset(const std::vector<Utterance>& utterances,
                        const FramingConfig& framing, std::size_t vocab);

/// Directory layout: utterances.txt ("vocab <V>" then one "<id> <frames>"
/// line per utterance) plus <id>.wav and <id>.lab.
void write_utterance_dir(const std::filesystem::path& dir,
                         const std::vector<Utterance>& utterances,
                         std::size_t vocab);
std::vector<Utterance> read_utterance_dir(const std::filesystem::path& dir);

/// Label sequences from every <id>.lab listed in utterances.txt, or from all
/// *.lab files in name order when there is no list.
std::vector<LabelSequence> read_label_dir(const std::filesystem::path& dir);

/// Vocabulary size recorded in utterances.txt, if the directory has one.
std::optional<std::size_t> utterance_dir_vocab(const std::filesystem::path& dir);

inline constexpr const char* kUtteranceList = "utterances.txt";

/// Synthesizes or reads the source, framed for `model`.
Dataset load_dataset(const DataSource& source, const ModelConfig& model);

FramingConfig framing_for(const FrontendConfig& frontend);

}  // namespace relfb
