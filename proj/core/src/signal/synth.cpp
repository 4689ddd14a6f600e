#include "relfb/signal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/signal/framing.hpp"

namespace relfb {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (classes == 0) throw ConfigError("classes", "must be positive");
  if (peaks_hz.size() != classes) {
    throw ConfigError("peaks_hz", "need one peak list per class");
  }
  const double nyquist = kPipelineSampleRate / 2.0;
  for (const auto& peaks : peaks_hz) {
    if (peaks.empty()) throw ConfigError("peaks_hz", "class without peaks");
    for (double f : peaks) {
      if (!(f > 0.0 && f < nyquist)) {
        throw ConfigError("peaks_hz", "peak " + std::to_string(f) +
                                          " Hz outside (0, Nyquist)");
      }
    }
  }
  if (snr_db_min > snr_db_max || std::isnan(snr_db_min) || std::isnan(snr_db_max)) {
    throw ConfigError("snr_db", "minimum exceeds maximum");
  }
  if (min_frames == 0 || min_frames > max_frames) {
    throw ConfigError("frames", "need 0 < min <= max");
  }
  if (utterances == 0) throw ConfigError("utterances", "must be positive");
  if (transition.size() != classes) {
    throw ConfigError("transition", "must be classes x classes");
  }
  for (const auto& row : transition) {
    if (row.size() != classes) {
      throw ConfigError("transition", "must be classes x classes");
    }
    double total = 0.0;
    for (double p : row) {
      if (p < 0.0) throw ConfigError("transition", "negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("transition", "row sums to " + std::to_string(total));
    }
  }
  if (!groups.empty() && groups.size() != classes) {
    throw ConfigError("groups", "need one group id per class");
  }
  if (frame_shift == 0 || frame_length <= frame_shift) {
    throw ConfigError("frame_length", "must exceed frame_shift > 0");
  }
  if (!(amplitude > 0.0 && amplitude <= 1.0)) {
    throw ConfigError("amplitude", "must be in (0, 1]");
  }
}

std::size_t label_frame_of_sample(std::size_t sample, std::size_t frame_length,
                                  std::size_t shift, std::size_t frame_total) {
  const std::size_t lead = (frame_length - shift) / 2;
  if (sample < lead) return 0;
  return std::min((sample - lead) / shift, frame_total - 1);
}

TransitionMatrix sticky_transition(std::size_t classes, double stay) {
  TransitionMatrix t(classes, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t j = 0; j < classes; ++j) {
      if (classes == 1) {
        t[i][j] = 1.0;
      } else {
        t[i][j] = i == j ? stay : (1.0 - stay) / static_cast<double>(classes - 1);
      }
    }
  }
  return t;
}

TransitionMatrix grouped_transition(const std::vector<std::size_t>& groups,
                                    double stay, double within) {
  const std::size_t n = groups.size();
  TransitionMatrix t(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t same = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && groups[j] == groups[i]) ++same;
    }
    const std::size_t other = n - 1 - same;
    double across = 1.0 - stay - within;
    double inside = within;
    if (same == 0) {
      across += inside;
      inside = 0.0;
    }
    if (other == 0) {
      inside += across;
      across = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        t[i][j] = stay;
      } else if (groups[j] == groups[i]) {
        t[i][j] = inside / static_cast<double>(same);
      } else {
        t[i][j] = across / static_cast<double>(other);
      }
    }
  }
  return t;
}

std::vector<std::int32_t> sample_markov_sequence(const TransitionMatrix& transition,
                                                 std::size_t length, Rng& rng) {
  std::vector<std::int32_t> seq;
  seq.reserve(length);
  if (length == 0) return seq;
  const std::size_t classes = transition.size();
  seq.push_back(static_cast<std::int32_t>(rng.index(classes)));
  for (std::size_t t = 1; t < length; ++t) {
    const auto& row = transition[static_cast<std::size_t>(seq.back())];
    const double u = rng.uniform();
    double cdf = 0.0;
    std::size_t next = classes - 1;
    for (std::size_t j = 0; j < classes; ++j) {
      cdf += row[j];
      if (u < cdf) {
        next = j;
        break;
      }
    }
    seq.push_back(static_cast<std::int32_t>(next));
  }
  return seq;
}

std::vector<Utterance> synth_classification_dataset(const SyntheticSpec& spec,
                                                    std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng::substream(seed, "data-synth");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double rate = kPipelineSampleRate;

  std::vector<Utterance> out;
  out.reserve(spec.utterances);
  for (std::size_t u = 0; u < spec.utterances; ++u) {
    const std::size_t frames =
        spec.min_frames + rng.index(spec.max_frames - spec.min_frames + 1);
    std::vector<std::int32_t> labels =
        sample_markov_sequence(spec.transition, frames, rng);

    std::vector<std::vector<double>> phases(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t k = 0; k < spec.peaks_hz[c].size(); ++k) {
        phases[c].push_back(rng.uniform(0.0, kTwoPi));
      }
    }

    const std::size_t length = spec.frame_length + (frames - 1) * spec.frame_shift;
    std::vector<double> samples(length, 0.0);
    double power = 0.0;
    for (std::size_t s = 0; s < length; ++s) {
      const std::size_t j =
          label_frame_of_sample(s, spec.frame_length, spec.frame_shift, frames);
      const auto c = static_cast<std::size_t>(labels[j]);
      const auto& peaks = spec.peaks_hz[c];
      const double amp = spec.amplitude / static_cast<double>(peaks.size());
      double v = 0.0;
      for (std::size_t k = 0; k < peaks.size(); ++k) {
        v += amp * std::sin(kTwoPi * peaks[k] * static_cast<double>(s) / rate +
                            phases[c][k]);
      }
      samples[s] = v;
      power += v * v;
    }
    power /= static_cast<double>(length);

    if (spec.noise_enabled()) {
      const double snr_db = rng.uniform(spec.snr_db_min, spec.snr_db_max);
      const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
      for (double& v : samples) v += noise_std * rng.normal();
    }
    for (double& v : samples) v = std::clamp(v, -1.0, 1.0);

    char id[32];
    std::snprintf(id, sizeof(id), "utt%04zu", u);
    Utterance utt;
    utt.id = id;
    utt.wave.samples = std::move(samples);
    utt.wave.sample_rate = kPipelineSampleRate;
    utt.labels.senone_ids = std::move(labels);
    utt.labels.vocab_size = spec.classes;
    out.push_back(std::move(utt));
  }
  return out;
}

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::pair<double, double> parse_range(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() != "inf") throw ConfigError(key, "expected \"inf\"");
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(key, "expected [min, max]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("spec", e.what());
  }
  if (!j.is_object()) throw ConfigError("spec", "expected a JSON object");

  SyntheticSpec spec;
  spec.classes = get_field<std::size_t>(j, "classes");
  spec.peaks_hz = get_field<std::vector<std::vector<double>>>(j, "peaks_hz");
  if (j.contains("snr_db")) {
    std::tie(spec.snr_db_min, spec.snr_db_max) = parse_range(j, "snr_db");
  }
  if (j.contains("frames")) {
    auto [lo, hi] = parse_range(j, "frames");
    if (!(lo >= 1.0 && hi >= lo) || std::isinf(hi)) {
      throw ConfigError("frames", "expected positive [min, max]");
    }
    spec.min_frames = static_cast<std::size_t>(lo);
    spec.max_frames = static_cast<std::size_t>(hi);
  }
  if (j.contains("utterances")) spec.utterances = get_field<std::size_t>(j, "utterances");
  if (j.contains("groups")) spec.groups = get_field<std::vector<std::size_t>>(j, "groups");
  if (j.contains("frame_length")) spec.frame_length = get_field<std::size_t>(j, "frame_length");
  if (j.contains("frame_shift")) spec.frame_shift = get_field<std::size_t>(j, "frame_shift");
  if (j.contains("amplitude")) spec.amplitude = get_field<double>(j, "amplitude");

  if (j.contains("transition")) {
    spec.transition = get_field<TransitionMatrix>(j, "transition");
  } else {
    const double stay =
        j.contains("self_transition") ? get_field<double>(j, "self_transition") : 0.3;
    if (!(stay >= 0.0 && stay <= 1.0)) {
      throw ConfigError("self_transition", "must be in [0, 1]");
    }
    if (!spec.groups.empty() && j.contains("within_group")) {
      if (spec.groups.size() != spec.classes) {
        throw ConfigError("groups", "need one group id per class");
      }
      spec.transition = grouped_transition(spec.groups, stay,
                                           get_field<double>(j, "within_group"));
    } else {
      spec.transition = sticky_transition(spec.classes, stay);
    }
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["classes"] = spec.classes;
  j["peaks_hz"] = spec.peaks_hz;
  if (spec.noise_enabled()) {
    j["snr_db"] = {spec.snr_db_min, spec.snr_db_max};
  } else {
    j["snr_db"] = "inf";
  }
  j["frames"] = {spec.min_frames, spec.max_frames};
  j["utterances"] = spec.utterances;
  j["transition"] = spec.transition;
  if (!spec.groups.empty()) j["groups"] = spec.groups;
  j["frame_length"] = spec.frame_length;
  j["frame_shift"] = spec.frame_shift;
  j["amplitude"] = spec.amplitude;
  return j.dump();
}

}  // namespace relfb
