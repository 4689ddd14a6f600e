#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relfb/numerics/autodiff.hpp"

namespace relfb {

enum class KernelFamily { kCosineGaussian, kSinc, kFixedMel };

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// `count` frequencies (Hz) equally spaced on the mel scale, endpoints
/// included.
std::vector<double> mel_spaced_hz(std::size_t count, double lo_hz, double hi_hz);

inline constexpr double kMelInitLowHz = 100.0;
inline constexpr double kMelInitHighHz = 7600.0;

/// Cosine-modulated Gaussian kernels on the n-grid -(L-1)/2..(L-1)/2:
/// g_i(n) = cos(2 pi mu_i n) exp(-n^2 mu_i^2 / 2), rows scaled to unit norm.
/// mu is in cycles/sample and must lie in (0, 0.5).
Var build_kernels(const Var& mu, std::size_t length);

/// |DFT| bins 0..nfft/2 of `kernel` zero-padded to `nfft` points.
std::vector<double> magnitude_spectrum(std::span<const double> kernel,
                                       std::size_t nfft = 1024);

/// Zero-phase FIR approximations of triangular mel filters (frequency
/// sampling + Hamming window), unit norm. No learnable parameters.
Tensor fixed_mel_kernels(std::size_t filters, std::size_t length,
                         double sample_rate);

/// The first-layer filterbank. Cosine-Gaussian banks learn one center
/// frequency per filter; sinc banks learn a (low, high) edge pair per filter;
/// the fixed-mel bank is constant.
class KernelBank {
 public:
  KernelBank(KernelFamily family, std::size_t filters, std::size_t length,
             double sample_rate = 16000.0);

  KernelFamily family() const noexcept { return family_; }
  std::size_t filters() const noexcept { return filters_; }
  std::size_t length() const noexcept { return length_; }

  /// Lowest/highest admissible normalized frequency: 1/L and 0.5 - 1/L.
  double min_frequency() const noexcept;
  double max_frequency() const noexcept;

  /// F x L kernel matrix, differentiable w.r.t. the bank parameter.
  Var kernels() const;

  /// Projects the parameter back into the admissible range.
  void clamp();

  /// Learnable parameter (mu [F] or edges [F,2]); nullptr for fixed-mel.
  Parameter* parameter() { return param_ ? &*param_ : nullptr; }
  const Parameter* parameter() const { return param_ ? &*param_ : nullptr; }

  /// Center frequency of each filter in cycles/sample.
  std::vector<double> center_frequencies() const;

 private:
  KernelFamily family_;
  std::size_t filters_;
  std::size_t length_;
  double sample_rate_;
  std::optional<Parameter> param_;
  Tensor fixed_;
};

}  // namespace relfb
