#pragma once

#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/tensor.hpp"

namespace resinv {

/// One single-channel image: pixels of shape [H, W] plus its pixel spacing.
struct ImageSample {
  Tensor pixels;
  Spacing resolution;
  int label = -1;

  Size2 size() const { return {static_cast<int>(pixels.dim(0)), static_cast<int>(pixels.dim(1))}; }
};

/// [N,1,H,W] batch from same-size samples.
Tensor stack_images(const std::vector<ImageSample>& samples);

/// The n-th image of an [N,1,H,W] (or [N,C,H,W], channel 0) batch as [H, W].
Tensor image_at(const Tensor& batch, std::size_t n);

/// [H,W] -> [1,1,H,W] without recording.
Tensor as_batch(const Tensor& image);

}  // namespace resinv
