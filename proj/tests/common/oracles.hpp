#pragma once

// Naive loop recomputations used as reference values for the vectorized ops.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "relfb/numerics/tensor.hpp"

namespace relfb::oracle {

/// signal [S], kernels [F,L] -> [F,S-L+1].
inline Tensor correlate1d(const Tensor& signal, const Tensor& kernels) {
  const std::size_t S = signal.size();
  const std::size_t F = kernels.dim(0);
  const std::size_t L = kernels.dim(1);
  Tensor out(Shape{F, S - L + 1});
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t j = 0; j + L <= S; ++j) {
      double acc = 0.0;
      for (std::size_t n = 0; n < L; ++n) acc += signal[j + n] * kernels.at(i, n);
      out.at(i, j) = acc;
    }
  }
  return out;
}

/// input [C,H,W], kernels [K,C,kh,kw] -> [K,H-kh+1,W-kw+1].
inline Tensor correlate2d(const Tensor& input, const Tensor& kernels) {
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t K = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  Tensor out(Shape{K, oh, ow});
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < C; ++ch) {
          for (std::size_t a = 0; a < kh; ++a) {
            for (std::size_t b = 0; b < kw; ++b) {
              acc += input[(ch * H + r + a) * W + c + b] *
                     kernels[((k * C + ch) * kh + a) * kw + b];
            }
          }
        }
        out[(k * oh + r) * ow + c] = acc;
      }
    }
  }
  return out;
}

/// input [K,H,W] -> [K,H/ph,W/pw].
inline Tensor maxpool(const Tensor& input, std::size_t ph, std::size_t pw) {
  const std::size_t K = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t oh = H / ph, ow = W / pw;
  Tensor out(Shape{K, oh, ow});
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double best = -INFINITY;
        for (std::size_t a = 0; a < ph; ++a) {
          for (std::size_t b = 0; b < pw; ++b) {
            best = std::max(best, input[(k * H + r * ph + a) * W + c * pw + b]);
          }
        }
        out[(k * oh + r) * ow + c] = best;
      }
    }
  }
  return out;
}

/// Per-row normalization of x [F,T] with the biased variance.
inline Tensor instance_norm(const Tensor& x, double eps) {
  const std::size_t F = x.dim(0), T = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += x.at(f, t);
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t) var += (x.at(f, t) - mean) * (x.at(f, t) - mean);
    var /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) {
      out.at(f, t) = (x.at(f, t) - mean) / std::sqrt(var + eps);
    }
  }
  return out;
}

/// Train-mode batch norm of x [B,K,H,W]; also returns the per-channel batch
/// mean and biased variance.
struct BatchNormOut {
  Tensor y;
  Tensor mean;
  Tensor var;
};

inline BatchNormOut batch_norm_train(const Tensor& x, double eps) {
  const std::size_t B = x.dim(0), K = x.dim(1), HW = x.dim(2) * x.dim(3);
  const double n = static_cast<double>(B * HW);
  BatchNormOut out{Tensor(x.shape()), Tensor(Shape{K}), Tensor(Shape{K})};
  for (std::size_t k = 0; k < K; ++k) {
    double mean = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < HW; ++i) mean += x[(b * K + k) * HW + i];
    }
    mean /= n;
    double var = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < HW; ++i) {
        const double d = x[(b * K + k) * HW + i] - mean;
        var += d * d;
      }
    }
    var /= n;
    out.mean[k] = mean;
    out.var[k] = var;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t at = (b * K + k) * HW + i;
        out.y[at] = (x[at] - mean) / std::sqrt(var + eps);
      }
    }
  }
  return out;
}

inline Tensor batch_norm_eval(const Tensor& x, const Tensor& mean,
                              const Tensor& var, double eps) {
  const std::size_t B = x.dim(0), K = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor y(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t at = (b * K + k) * HW + i;
        y[at] = (x[at] - mean[k]) / std::sqrt(var[k] + eps);
      }
    }
  }
  return y;
}

}  // namespace relfb::oracle
