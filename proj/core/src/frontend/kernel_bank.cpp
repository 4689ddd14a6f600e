#include "relfb/frontend/kernel_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relfb/numerics/errors.hpp"
#include "relfb/numerics/ops.hpp"

namespace relfb {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kCosineGaussian:
      return "cosine-gaussian";
    case KernelFamily::kSinc:
      return "sinc";
    case KernelFamily::kFixedMel:
      return "fixed-mel";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "cosine-gaussian") return KernelFamily::kCosineGaussian;
  if (name == "sinc") return KernelFamily::kSinc;
  if (name == "fixed-mel") return KernelFamily::kFixedMel;
  throw ConfigError("kernel", "unknown kernel family '" + std::string(name) + "'");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_spaced_hz(std::size_t count, double lo_hz, double hi_hz) {
  std::vector<double> out(count);
  const double lo = hz_to_mel(lo_hz);
  const double hi = hz_to_mel(hi_hz);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac =
        count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = mel_to_hz(lo + frac * (hi - lo));
  }
  return out;
}

std::vector<double> magnitude_spectrum(std::span<const double> kernel,
                                       std::size_t nfft) {
  if (kernel.size() > nfft) {
    throw DimensionError("magnitude_spectrum: kernel longer than the DFT size");
  }
  std::vector<double> out(nfft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < kernel.size(); ++n) {
      // Reduce k*n mod nfft so the angle stays small and exact.
      const double angle = -2.0 * std::numbers::pi *
                           static_cast<double>((k * n) % nfft) /
                           static_cast<double>(nfft);
      re += kernel[n] * std::cos(angle);
      im += kernel[n] * std::sin(angle);
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

Var build_kernels(const Var& mu, std::size_t length) {
  return cosine_gaussian_kernels(mu, length);
}

Tensor fixed_mel_kernels(std::size_t filters, std::size_t length,
                         double sample_rate) {
  if (length % 2 == 0) {
    throw DimensionError("fixed_mel_kernels: kernel length must be odd");
  }
  // F + 2 mel-spaced edges; filter i rises from edge i to i+1, falls to i+2.
  const std::vector<double> edges_hz =
      mel_spaced_hz(filters + 2, kMelInitLowHz, kMelInitHighHz);
  constexpr std::size_t kGrid = 2048;
  constexpr double kPi = std::numbers::pi;
  const double half = static_cast<double>((length - 1) / 2);
  Tensor out(Shape{filters, length});
  for (std::size_t f = 0; f < filters; ++f) {
    const double lo = edges_hz[f] / sample_rate;
    const double mid = edges_hz[f + 1] / sample_rate;
    const double hi = edges_hz[f + 2] / sample_rate;
    double norm = 0.0;
    for (std::size_t i = 0; i < length; ++i) {
      const double n = static_cast<double>(i) - half;
      double acc = 0.0;
      for (std::size_t k = 0; k <= kGrid; ++k) {
        const double nu = 0.5 * static_cast<double>(k) / kGrid;
        double gain = 0.0;
        if (nu > lo && nu <= mid) gain = (nu - lo) / (mid - lo);
        if (nu > mid && nu < hi) gain = (hi - nu) / (hi - mid);
        acc += gain * std::cos(2.0 * kPi * nu * n);
      }
      const double window =
          length == 1 ? 1.0 : 0.54 + 0.46 * std::cos(kPi * n / half);
      out[f * length + i] = acc * window;
      norm += out[f * length + i] * out[f * length + i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < length; ++i) out[f * length + i] /= norm;
  }
  return out;
}

KernelBank::KernelBank(KernelFamily family, std::size_t filters,
                       std::size_t length, double sample_rate)
    : family_(family), filters_(filters), length_(length), sample_rate_(sample_rate) {
  if (filters == 0) throw ConfigError("F", "need at least one filter");
  if (length < 3 || length % 2 == 0) {
    throw ConfigError("L", "kernel length must be odd and >= 3");
  }
  switch (family) {
    case KernelFamily::kCosineGaussian: {
      const auto hz = mel_spaced_hz(filters, kMelInitLowHz, kMelInitHighHz);
      Tensor mu(Shape{filters});
      for (std::size_t i = 0; i < filters; ++i) mu[i] = hz[i] / sample_rate;
      param_.emplace("frontend.mu", "mu", std::move(mu));
      break;
    }
    case KernelFamily::kSinc: {
      const auto hz = mel_spaced_hz(filters + 1, kMelInitLowHz, kMelInitHighHz);
      Tensor edges(Shape{filters, 2});
      for (std::size_t i = 0; i < filters; ++i) {
        edges[2 * i] = hz[i] / sample_rate;
        edges[2 * i + 1] = hz[i + 1] / sample_rate;
      }
      param_.emplace("frontend.band_edges", "mu", std::move(edges));
      break;
    }
    case KernelFamily::kFixedMel:
      fixed_ = fixed_mel_kernels(filters, length, sample_rate);
      break;
  }
  clamp();
}

double KernelBank::min_frequency() const noexcept {
  return 1.0 / static_cast<double>(length_);
}

double KernelBank::max_frequency() const noexcept {
  return 0.5 - 1.0 / static_cast<double>(length_);
}

Var KernelBank::kernels() const {
  switch (family_) {
    case KernelFamily::kCosineGaussian:
      return build_kernels(param_->var(), length_);
    case KernelFamily::kSinc:
      return sinc_kernels(param_->var(), length_);
    case KernelFamily::kFixedMel:
      break;
  }
  return Var::constant(fixed_);
}

void KernelBank::clamp() {
  if (!param_) return;
  Tensor& v = param_->value();
  const double lo = min_frequency();
  const double hi = max_frequency();
  if (family_ == KernelFamily::kCosineGaussian) {
    for (double& m : v.values()) m = std::clamp(m, lo, hi);
    return;
  }
  // Sinc: keep lo <= low <= high - 1/L and high <= hi.
  const double min_band = 1.0 / static_cast<double>(length_);
  for (std::size_t f = 0; f < filters_; ++f) {
    double& low = v[2 * f];
    double& high = v[2 * f + 1];
    low = std::clamp(low, lo, hi - min_band);
    high = std::clamp(high, low + min_band, hi);
  }
}

std::vector<double> KernelBank::center_frequencies() const {
  std::vector<double> out(filters_);
  if (family_ == KernelFamily::kCosineGaussian) {
    for (std::size_t f = 0; f < filters_; ++f) out[f] = param_->value()[f];
  } else if (family_ == KernelFamily::kSinc) {
    for (std::size_t f = 0; f < filters_; ++f) {
      out[f] = 0.5 * (param_->value()[2 * f] + param_->value()[2 * f + 1]);
    }
  } else {
    const auto hz = mel_spaced_hz(filters_ + 2, kMelInitLowHz, kMelInitHighHz);
    for (std::size_t f = 0; f < filters_; ++f) out[f] = hz[f + 1] / sample_rate_;
  }
  return out;
}

}  // namespace relfb
