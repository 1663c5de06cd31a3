#pragma once

// Size planning for the variable-factor encoder/decoder, and the learnable
// resizing block (bilinear skip path plus a convolutional residual path).

#include <array>
#include <string>
#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/rng.hpp"
#include "resinv/tensor.hpp"

namespace resinv {

enum class Direction { encode, decode };

struct ResizePlan {
  Direction direction = Direction::encode;
  /// n + 1 grids. Encode: [0] is the image, [n] the latent.
  /// Decode: [0] is the latent, [n] the output image.
  std::vector<Size2> layer_sizes;
  /// Per-axis real factor (l / r)^(1/n) before any rounding, (y, x).
  std::array<double, 2> axis_factor{1.0, 1.0};
  /// Realised per-layer ratios. Encode: sizes[k] / sizes[k+1];
  /// decode: sizes[k+1] / sizes[k]. Both are >= 1.
  std::vector<std::array<double, 2>> layer_ratios;

  int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::string dump() const;
};

/// Encode-direction plan from an input grid to the fixed latent grid.
/// Intermediate sizes follow round(s0 * (sn/s0)^(k/n)); the last is exact.
ResizePlan compute_resize_plan(Size2 input_size, Spacing input_res, Size2 latent_size, Spacing latent_res,
                               int n_layers);

/// Decode-direction plan: the reverse of the encode plan for (target_size, target_res).
ResizePlan compute_decode_plan(Size2 latent_size, Spacing latent_res, Size2 target_size, Spacing target_res,
                               int n_layers);

/// Classical halving schedule (factor 2 per layer) used by the fixed-factor
/// baseline; the last grid must come out equal to latent_size.
ResizePlan fixed_factor_plan(Size2 image_size, Size2 latent_size, int n_layers, Direction direction);

/// Channel-preserving residual path of the resizing block. The resize factor
/// is an input, never a parameter, so the parameter count is factor-free.
struct ResizeBlockParams {
  Tensor pre1_w, pre1_b;  // 3x3
  Tensor pre2_w, pre2_b;  // 3x3
  Tensor post_w, post_b;  // 3x3, applied after resizing; merges into the skip

  static ResizeBlockParams init(std::size_t channels, Rng& rng);
  std::vector<Tensor> tensors() const;
};

/// interp_resize(x) + post(interp_resize(pre2(leaky(pre1(x))))).
Tensor learnable_resize_block(const Tensor& x, Size2 target, const ResizeBlockParams& params);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) conv weight [cout,cin,k,k]; bias zero.
Tensor init_conv_weight(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng, double gain = 1.0);

}  // namespace resinv
