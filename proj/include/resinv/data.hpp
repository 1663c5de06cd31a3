#pragma once

// Procedural stand-in corpus: piecewise-constant shapes over a smooth
// background, overlaid with an oriented sinusoidal texture whose wavelength
// band depends on the class label.

#include <cstdint>
#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/image.hpp"

namespace resinv {

struct SyntheticDataset {
  std::uint64_t seed = 1;
  Size2 size{64, 64};
  Spacing resolution{1.0, 1.0};
  int class_count = 2;
  /// Wavelength bands in pixels: class 0 is coarse (above the 8 px latent
  /// stride), class 1 fine (< 4 px, lost under downsampling).
  double coarse_wavelength_min = 24.0;
  double coarse_wavelength_max = 40.0;
  double fine_wavelength_min = 2.5;
  double fine_wavelength_max = 3.8;
  double texture_amplitude_min = 0.02;
  double texture_amplitude_max = 0.04;
  int shapes_min = 2;
  int shapes_max = 4;
};

/// Image i uses its own substream of `config.seed`; label i is i % class_count
/// (single-class corpora draw wavelengths from both bands and label 0).
std::vector<ImageSample> generate_synthetic(const SyntheticDataset& config, int n);

/// Bilinear degradation by `factor` (>= 1): size round(S / f) per axis and a
/// spacing that keeps the physical field of view.
ImageSample degrade(const ImageSample& sample, double factor);

/// Resample to an explicit grid, keeping the field of view.
ImageSample resample_to(const ImageSample& sample, Size2 size);

}  // namespace resinv
