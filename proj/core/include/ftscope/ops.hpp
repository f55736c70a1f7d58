#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ftscope/autodiff.hpp"

namespace ftscope::ops {

// Elementwise arithmetic on equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Weighted sum of same-shaped values: sum_i weights[i] * terms[i].
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

/// Sum of all elements, shape [1].
Var sum(Var a);
/// Mean of all elements, shape [1].
Var mean(Var a);
Var reshape(Var a, Shape shape);

Var relu(Var a);
Var sigmoid(Var a);
/// Row-wise softmax over the last axis of a [N, K] input.
Var softmax(Var logits);

/// x [N, C] times w [K, C] transposed, plus b [K].
Var dense(Var x, Var w, Var b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation of x [N, C, H, W] with w [F, C, kh, kw], plus b [F].
/// Output is [N, F, (H + 2p - kh) / s + 1, (W + 2p - kw) / s + 1].
Var conv2d(Var x, Var w, Var b, Conv2dOptions options = {});

enum class PoolKind { max, avg };

/// Pooling over [N, C, H, W]. Padded positions are excluded from both the max and
/// the average (the average divides by the count of valid elements).
Var pool2d(Var x, PoolKind kind, std::size_t size, std::size_t stride, std::size_t padding = 0);

/// Concatenates [N, Ci, H, W] inputs along the channel axis.
Var concat_channels(std::span<const Var> parts);

/// [N, C, H, W] -> [N, C], mean over each spatial map.
Var global_avg_pool(Var x);

/// [N, C] -> [N], the selected column.
Var select_column(Var x, std::size_t column);

inline constexpr double kProbClamp = 1e-12;

/// Mean over rows of -log(max(probs[n, label[n]], 1e-12)).
Var cross_entropy(Var probs, std::span<const int> labels);

/// Sum over classes of binary cross-entropy, averaged over rows. Probabilities
/// are clamped to [1e-12, 1 - 1e-12] before the logarithm.
Var multilabel_bce(Var probs, const Tensor& targets);

/// Differentiable inverse real 2D FFT. `spectrum` is [C, H, W/2+1, 2] (re, im)
/// half-spectra; output is [C, H, W].
Var irfft2(Var spectrum, std::size_t height, std::size_t width);

}  // namespace ftscope::ops
