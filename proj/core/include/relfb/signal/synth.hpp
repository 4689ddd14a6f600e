#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "relfb/numerics/rng.hpp"
#include "relfb/signal/labels.hpp"
#include "relfb/signal/wav.hpp"

namespace relfb {

using TransitionMatrix = std::vector<std::vector<double>>;

/// Desk-scale stand-in for a labelled speech corpus: each frame carries a
/// class drawn from a Markov chain and the waveform under that frame is a sum
/// of the class's sinusoids plus white noise at a per-utterance SNR.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::vector<std::vector<double>> peaks_hz;  // per class, each < 8000
  double snr_db_min = 5.0;
  double snr_db_max = 20.0;  // +inf on both ends disables noise
  std::size_t min_frames = 100;
  std::size_t max_frames = 100;
  std::size_t utterances = 40;
  TransitionMatrix transition;            // classes x classes, rows sum to 1
  std::vector<std::size_t> groups;        // optional group id per class
  std::size_t frame_length = 400;
  std::size_t frame_shift = 160;
  double amplitude = 0.5;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool noise_enabled() const noexcept {
    return snr_db_max < std::numeric_limits<double>::infinity();
  }
};

struct Utterance {
  std::string id;
  WaveBuffer wave;
  UtteranceLabels labels;
};

/// Pure function of (spec, seed).
std::vector<Utterance> synth_classification_dataset(const SyntheticSpec& spec,
                                                    std::uint64_t seed);

/// Frame whose label governs sample `s`: segments are `shift` samples wide
/// and centred on each frame, clamped to the first/last frame.
std::size_t label_frame_of_sample(std::size_t sample, std::size_t frame_length,
                                  std::size_t shift, std::size_t frame_total);

/// Stay with probability `stay`, otherwise move uniformly to another class.
TransitionMatrix sticky_transition(std::size_t classes, double stay);

/// Block-structured chain: stay with `stay`, move within the same group with
/// total mass `within`, leave the group with the remaining mass.
TransitionMatrix grouped_transition(const std::vector<std::size_t>& groups,
                                    double stay, double within);

/// Label sequence of `length` steps; the first state is uniform.
std::vector<std::int32_t> sample_markov_sequence(const TransitionMatrix& transition,
                                                 std::size_t length, Rng& rng);

SyntheticSpec synthetic_spec_from_json(std::string_view json_text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

}  // namespace relfb
