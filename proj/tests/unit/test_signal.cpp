#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "relfb/frontend/kernel_bank.hpp"
#include "relfb/numerics/errors.hpp"
#include "relfb/signal/feature_file.hpp"
#include "relfb/signal/framing.hpp"
#include "relfb/signal/labels.hpp"
#include "relfb/signal/manifest.hpp"
#include "relfb/signal/synth.hpp"
#include "relfb/signal/wav.hpp"
#include "test_helpers.hpp"

namespace relfb {
namespace {

namespace fs = std::filesystem;

void write_raw_pcm(const fs::path& path, const std::vector<std::int16_t>& pcm) {
  WaveBuffer w;
  for (std::int16_t v : pcm) w.samples.push_back(v / 32768.0);
  write_wav(path, w);
}

TEST(Wav, ZerosAndScaling) {
  const fs::path dir = test::scratch_dir("wav_scale");
  write_raw_pcm(dir / "a.wav", {0, 0, 16384, -32768});
  const WaveBuffer w = read_wav(dir / "a.wav");
  ASSERT_EQ(w.samples.size(), 4u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[2], 0.5);
  EXPECT_EQ(w.samples[3], -1.0);
  EXPECT_EQ(w.sample_rate, 16000);
}

TEST(Wav, RoundTripWithinOneLsb) {
  const fs::path dir = test::scratch_dir("wav_rt");
  Rng rng(1);
  WaveBuffer w;
  for (int i = 0; i < 1000; ++i) w.samples.push_back(rng.uniform(-1.0, 1.0));
  write_wav(dir / "r.wav", w);
  const WaveBuffer back = read_wav(dir / "r.wav");
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_LE(std::abs(back.samples[i] - w.samples[i]), 1.0 / 32768.0);
  }
}

TEST(Wav, WrongRateNamesField) {
  const fs::path dir = test::scratch_dir("wav_rate");
  WaveBuffer w;
  w.samples = {0.1, 0.2};
  w.sample_rate = 8000;
  write_wav(dir / "r.wav", w);
  try {
    read_wav(dir / "r.wav");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("sample_rate"), std::string::npos);
  }
}

TEST(Wav, GarbageIsRejected) {
  const fs::path dir = test::scratch_dir("wav_bad");
  std::ofstream(dir / "x.wav") << "not a wave file at all";
  EXPECT_THROW(read_wav(dir / "x.wav"), FormatError);
}

TEST(Framing, Counts) {
  EXPECT_EQ(frame_count(16000, 400, 160), 98u);
  EXPECT_EQ(frame_count(400, 400, 160), 1u);
  EXPECT_EQ(frame_count(399, 400, 160), 0u);
}

TEST(Framing, RampFrameStarts) {
  std::vector<double> ramp(1000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  const Tensor frames = frame_signal(ramp, FramingConfig{});
  EXPECT_EQ(frames.dim(0), frame_count(1000, 400, 160));
  EXPECT_EQ(frames.at(1, 0), 160.0);
  EXPECT_EQ(frames.at(2, 399), 320.0 + 399.0);
}

TEST(Framing, ShortSignalThrows) {
  EXPECT_THROW(frame_signal(std::vector<double>(100), FramingConfig{}), DimensionError);
}

TEST(Framing, ConfigValidation) {
  EXPECT_THROW((FramingConfig{160, 160, 101}.validate()), ConfigError);
  EXPECT_THROW((FramingConfig{400, 0, 101}.validate()), ConfigError);
  EXPECT_THROW((FramingConfig{400, 160, 100}.validate()), ConfigError);
  EXPECT_NO_THROW(FramingConfig{}.validate());
}

TEST(Framing, ShiftInvariance) {
  Rng rng(2);
  std::vector<double> s(3000);
  for (double& v : s) v = rng.normal();
  const FramingConfig cfg{};
  const Tensor a = frame_signal(s, cfg);
  const std::vector<double> dropped(s.begin() + 160, s.end());
  const Tensor b = frame_signal(dropped, cfg);
  ASSERT_EQ(b.dim(0) + 1, a.dim(0));
  for (std::size_t j = 0; j < b.dim(0); ++j) {
    for (std::size_t n = 0; n < 400; ++n) ASSERT_EQ(b.at(j, n), a.at(j + 1, n));
  }
}

TEST(Blocks, InteriorEdgeAndCenter) {
  const std::size_t N = 12, S = 3, T = 5;
  Tensor frames(Shape{N, S});
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t n = 0; n < S; ++n) frames.at(j, n) = static_cast<double>(10 * j + n);
  }
  const Tensor interior = assemble_block(frames, 6, T);
  for (std::size_t r = 0; r < T; ++r) EXPECT_EQ(interior.at(r, 0), 10.0 * (4 + r));
  const Tensor start = assemble_block(frames, 0, T);
  for (std::size_t r = 0; r <= 2; ++r) EXPECT_EQ(start.at(r, 1), 1.0);
  EXPECT_EQ(start.at(4, 0), 20.0);
  const Tensor end = assemble_block(frames, N - 1, T);
  EXPECT_EQ(end.at(4, 0), 110.0);
  for (std::size_t t = 0; t < N; ++t) {
    const Tensor b = assemble_block(frames, t, T);
    for (std::size_t n = 0; n < S; ++n) EXPECT_EQ(b.at(T / 2, n), frames.at(t, n));
  }
}

TEST(FeatureFile, RoundTripIsExact) {
  const fs::path dir = test::scratch_dir("rwf");
  Rng rng(3);
  Tensor m = test::random_tensor(Shape{5, 7}, rng);
  write_features(dir / "d.rwf", m, FeatureDType::kFloat64);
  EXPECT_EQ(read_features(dir / "d.rwf"), m);

  for (double& v : m.values()) v = static_cast<float>(v);
  write_features(dir / "f.rwf", m);
  EXPECT_EQ(read_features(dir / "f.rwf"), m);
  EXPECT_EQ(fs::file_size(dir / "f.rwf"), kFeatureHeaderBytes + 4u * 5 * 7);
}

TEST(FeatureFile, EmptyMatrixRoundTrips) {
  const fs::path dir = test::scratch_dir("rwf_empty");
  const Tensor m(Shape{0, 6});
  write_features(dir / "e.rwf", m);
  const Tensor back = read_features(dir / "e.rwf");
  EXPECT_EQ(back.shape(), (Shape{0, 6}));
  EXPECT_EQ(fs::file_size(dir / "e.rwf"), kFeatureHeaderBytes);
}

TEST(FeatureFile, BadMagicAndTruncation) {
  const fs::path dir = test::scratch_dir("rwf_bad");
  std::ofstream(dir / "m.rwf", std::ios::binary) << "RWF2xxxxxxxxxxxx";
  EXPECT_THROW(read_features(dir / "m.rwf"), FormatError);
  write_features(dir / "t.rwf", Tensor(Shape{3, 3}, 1.0));
  fs::resize_file(dir / "t.rwf", kFeatureHeaderBytes + 10);
  EXPECT_THROW(read_features(dir / "t.rwf"), FormatError);
}

TEST(Labels, FileRoundTripAndValidation) {
  const fs::path dir = test::scratch_dir("labels");
  write_label_file(dir / "a.lab", {3, 0, 7});
  EXPECT_EQ(read_label_file(dir / "a.lab"), (std::vector<std::int32_t>{3, 0, 7}));
  std::ofstream(dir / "bad.lab") << "1\nx\n";
  EXPECT_THROW(read_label_file(dir / "bad.lab"), FormatError);
  UtteranceLabels l{{0, 8}, 8};
  EXPECT_THROW(l.validate(), ConfigError);
}

TEST(Manifest, RoundTripAndMissingKey) {
  const fs::path dir = test::scratch_dir("manifest");
  write_manifest(dir / "m.txt", {{"a", "1"}, {"b", "x=y z"}});
  const Manifest m = read_manifest(dir / "m.txt");
  EXPECT_EQ(manifest_value(m, "b"), "x=y z");
  EXPECT_THROW(manifest_value(m, "c"), FormatError);
}

SyntheticSpec clean_spec() {
  SyntheticSpec s;
  s.classes = 3;
  s.peaks_hz = {{1000.0}, {2500.0}, {4000.0}};
  s.snr_db_min = s.snr_db_max = std::numeric_limits<double>::infinity();
  s.min_frames = 30;
  s.max_frames = 40;
  s.utterances = 3;
  s.transition = sticky_transition(3, 0.8);
  return s;
}

TEST(Synth, DeterministicGivenSeed) {
  SyntheticSpec s = clean_spec();
  s.snr_db_min = 0.0;
  s.snr_db_max = 10.0;
  const auto a = synth_classification_dataset(s, 9);
  const auto b = synth_classification_dataset(s, 9);
  const auto c = synth_classification_dataset(s, 10);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].wave.samples, b[i].wave.samples);
    EXPECT_EQ(a[i].labels.senone_ids, b[i].labels.senone_ids);
  }
  EXPECT_NE(a[0].wave.samples, c[0].wave.samples);
}

TEST(Synth, LabelsMatchFrameCount) {
  const auto data = synth_classification_dataset(clean_spec(), 1);
  for (const auto& u : data) {
    const std::size_t n = frame_count(u.wave.samples.size(), 400, 160);
    EXPECT_EQ(u.labels.senone_ids.size(), n);
    EXPECT_GE(n, 30u);
    EXPECT_LE(n, 40u);
  }
}

TEST(Synth, NoiselessFramePeakMatchesClass) {
  const SyntheticSpec spec = clean_spec();
  const auto data = synth_classification_dataset(spec, 2);
  const FramingConfig cfg{};
  for (const auto& u : data) {
    const Tensor frames = frame_signal(u.wave.samples, cfg);
    const auto& ids = u.labels.senone_ids;
    for (std::size_t j = 1; j + 1 < ids.size(); ++j) {
      // Frames straddling a class change mix two tones.
      if (ids[j - 1] != ids[j] || ids[j + 1] != ids[j]) continue;
      const auto spec_mag = magnitude_spectrum(frames.slice(j), 1024);
      const auto peak = static_cast<std::size_t>(
          std::max_element(spec_mag.begin(), spec_mag.end()) - spec_mag.begin());
      const double hz = spec.peaks_hz[static_cast<std::size_t>(ids[j])][0];
      EXPECT_NEAR(static_cast<double>(peak), hz / 16000.0 * 1024.0, 1.0);
    }
  }
}

TEST(Synth, IdentityTransitionKeepsLabel) {
  SyntheticSpec s = clean_spec();
  s.transition = sticky_transition(3, 1.0);
  for (const auto& u : synth_classification_dataset(s, 4)) {
    for (auto id : u.labels.senone_ids) EXPECT_EQ(id, u.labels.senone_ids[0]);
  }
}

TEST(Synth, SegmentsAlignWithLabels) {
  // Label j governs samples [lead + j*shift, lead + (j+1)*shift).
  EXPECT_EQ(label_frame_of_sample(0, 400, 160, 10), 0u);
  EXPECT_EQ(label_frame_of_sample(120 + 160, 400, 160, 10), 1u);
  EXPECT_EQ(label_frame_of_sample(120 + 159, 400, 160, 10), 0u);
  EXPECT_EQ(label_frame_of_sample(100000, 400, 160, 10), 9u);
}

TEST(Synth, InvalidSpecNamesField) {
  SyntheticSpec s = clean_spec();
  s.peaks_hz[1] = {9000.0};
  try {
    s.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "peaks_hz");
  }
  s = clean_spec();
  s.transition[0] = {0.5, 0.4, 0.0};
  try {
    s.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "transition");
  }
}

TEST(Synth, JsonRoundTrip) {
  SyntheticSpec s = clean_spec();
  s.groups = {0, 0, 1};
  const SyntheticSpec back = synthetic_spec_from_json(synthetic_spec_to_json(s));
  EXPECT_EQ(back.peaks_hz, s.peaks_hz);
  EXPECT_EQ(back.transition, s.transition);
  EXPECT_EQ(back.groups, s.groups);
  EXPECT_FALSE(back.noise_enabled());
}

TEST(Synth, GroupedTransitionRowsSumToOne) {
  const auto t = grouped_transition({0, 0, 1, 1, 2}, 0.2, 0.6);
  for (const auto& row : t) {
    double total = 0.0;
    for (double p : row) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_DOUBLE_EQ(t[0][1], 0.6);
  EXPECT_DOUBLE_EQ(t[4][4], 0.2);
}

}  // namespace
}  // namespace relfb
