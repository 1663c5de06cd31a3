#pragma once

// Differentiable tensor operations. Elementwise binary ops require identical
// shapes; the only broadcasting is tensor-by-scalar through the *_scalar
// variants. Image tensors use (batch, channels, height, width) layout.

#include <span>
#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/tensor.hpp"

namespace resinv::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor leaky_relu(const Tensor& a, double slope);
/// x * sigmoid(x)
Tensor silu(const Tensor& a);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);

/// Stride-1 cross-correlation. `bias` may be undefined.
/// Output extent per axis: in + 2*padding - k + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding);

/// Per-sample normalisation over groups of channels, then per-channel affine.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps = 1e-6);

/// Separable bilinear resize with half-pixel centres and edge clamping.
Tensor interp_resize(const Tensor& x, Size2 target);

/// Valid-mode separable filter applied to every (n, c) plane with the same
/// 1D kernel along both axes. Output extent: in - len(kernel) + 1.
Tensor separable_filter_valid(const Tensor& x, std::span<const double> kernel);

/// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);

/// x[N,F] * weight[O,F]^T + bias[O] -> [N,O]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Mean over the batch of -log softmax(logits[n])[labels[n]].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Softmax probabilities of a [N,K] logits tensor (no recording).
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace resinv::ops
