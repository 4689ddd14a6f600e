#pragma once

// Differentiable operations over Var. All forward passes check their output
// for NaN/Inf and throw NumericError. Convolutions are cross-correlations
// (no kernel flip).

#include <cstddef>
#include <span>
#include <vector>

#include "relfb/numerics/autodiff.hpp"

namespace relfb {

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var square(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
/// ln(max(x, floor)). The gradient is zero where x < floor.
Var log_floor(const Var& a, double floor);
/// Softmax over the last axis (rank 1 or 2).
Var softmax(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// Mean over the last axis; the result drops that axis.
Var mean_last(const Var& a);

// Shape manipulation.
Var reshape(const Var& a, Shape shape);
Var transpose(const Var& a);
Var concat_cols(const Var& a, const Var& b);
/// Tiles a vector [p] (or [1,p]) into [n,p].
Var repeat_rows(const Var& v, std::size_t n);
Var stack(const std::vector<Var>& parts);
/// Sub-array `index` along axis 0.
Var select(const Var& a, std::size_t index);
Var gather_rows(const Var& table, std::span<const std::size_t> rows);

// Linear algebra.
/// [n,k]x[k,m] -> [n,m]; a rank-1 left operand [k] gives [m].
Var matmul(const Var& a, const Var& b);
/// Adds b [m] to every row of a [n,m] (or to a [m]).
Var add_bias(const Var& a, const Var& b);

/// Multiplies x by w broadcast over trailing axes; w.shape must be a prefix
/// of x.shape (e.g. x [F,T], w [F]).
Var scale_rows(const Var& x, const Var& w);
/// Adds b broadcast over trailing axes; b.shape must be a prefix of x.shape.
Var add_rows(const Var& x, const Var& b);

// Convolution and pooling.
/// signal [S] with kernels [F,L] -> [F,S-L+1]; signal [N,S] -> [N,F,S-L+1].
/// out[f][j] = sum_n signal[j+n] * kernels[f][n].
Var correlate1d_valid(const Var& signal, const Var& kernels);
/// input [C,H,W] with kernels [K,C,kh,kw] -> [K,H-kh+1,W-kw+1].
Var correlate2d_valid(const Var& input, const Var& kernels);
/// Max over non-overlapping (ph,pw) windows of input [K,H,W]; remainder rows
/// and columns are dropped. Gradient goes to the first maximal element.
Var maxpool2d(const Var& input, std::size_t ph, std::size_t pw);

// Normalization.
/// Each row of x [F,T] normalized to zero mean, unit (biased) variance.
Var instance_norm(const Var& x, double eps);

enum class BatchNormMode { kTrain, kEval };

struct BatchNormState {
  Tensor running_mean;  // [K]
  Tensor running_var;   // [K]
  bool update_running = true;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

/// x [B,K,H,W]. Train mode normalizes each channel over (B,H,W) with the
/// biased batch variance and blends running stats as
/// running = momentum * running + (1 - momentum) * batch (unbiased variance).
Var batch_norm(const Var& x, BatchNormState& state, BatchNormMode mode,
               double eps, double momentum);

// Loss.
/// -ln(max(posterior[target], 1e-8)). Posterior must be a distribution.
Var cross_entropy(const Var& posterior, std::size_t target);
/// Mean cross-entropy over the rows of posterior [B,C].
Var cross_entropy(const Var& posterior, std::span<const std::size_t> targets);

inline constexpr double kLogFloor = 1e-8;

// Parametric filter kernels on the symmetric grid n = -(L-1)/2 .. (L-1)/2.
/// cos(2 pi mu n) exp(-n^2 mu^2 / 2), each row scaled to unit l2 norm.
Var cosine_gaussian_kernels(const Var& mu, std::size_t length);
/// Band-pass sinc kernels from band edges [F,2] (low, high) in
/// cycles/sample, Hamming-windowed and scaled to unit l2 norm.
Var sinc_kernels(const Var& edges, std::size_t length);

}  // namespace relfb
