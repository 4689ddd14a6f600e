#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace relfb {

/// Deterministic random source: std::mt19937_64 (bit-identical across
/// standard libraries) with hand-written conversions to doubles, so that
/// draws do not depend on implementation-defined std distributions.
/// Independent substreams are keyed by a purpose string ("init", "shuffle",
/// "data-synth", ...).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Stream for `purpose`, derived from `seed` with SplitMix64 mixing.
  static Rng substream(std::uint64_t seed, std::string_view purpose);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace relfb
