#pragma once

// Resolution-invariant variational autoencoder. Every layer is a residual
// block followed by a learnable resizing block whose target size comes from
// the per-input resize plan, so the latent grid is the same for any input
// resolution at or coarser than the reference resolution.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/image.hpp"
#include "resinv/resize.hpp"
#include "resinv/rng.hpp"
#include "resinv/tensor.hpp"

namespace resinv {

enum class ResizeMode {
  variable,      // per-input factors from the resize plan
  fixed_factor,  // classical factor-2 per layer (baseline)
};

struct ModelConfig {
  int n_layers = 3;
  int base_channels = 32;
  int latent_channels = 4;
  Size2 latent_grid{8, 8};
  /// Finest resolution seen in training; defines the latent resolution.
  Spacing highest_train_res{1.0, 1.0};
  ResizeMode resize_mode = ResizeMode::variable;

  /// highest_train_res * 2^n_layers per axis.
  Spacing latent_res() const;
  /// Image size at the reference resolution that maps onto latent_grid.
  Size2 reference_size() const;
  std::vector<std::size_t> encoder_channels() const;
  void validate() const;
};

struct LatentDistribution {
  Tensor mu;      // [N, latent_channels, h, w]
  Tensor logvar;  // same shape

  Size2 grid() const { return {static_cast<int>(mu.dim(2)), static_cast<int>(mu.dim(3))}; }
};

struct LatentCode {
  Tensor z;
  Spacing source_resolution;
  double gamma_applied = 0.0;
};

struct ResBlockParams {
  Tensor conv1_w, conv1_b, norm_g, norm_b, conv2_w, conv2_b;
  Tensor skip_w, skip_b;  // only when channel count changes
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

class Autoencoder {
 public:
  Autoencoder(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  ResizePlan encode_plan(Size2 input_size, Spacing input_res) const;
  ResizePlan decode_plan(Size2 target_size, Spacing target_res) const;

  /// images: [N,1,H,W] at `res`. Rejects inputs finer than the reference.
  LatentDistribution encode(const Tensor& images, Spacing res) const;
  LatentDistribution encode(const ImageSample& image) const;

  /// z: [N, latent_channels, h, w] on the latent grid -> [N,1,H',W'].
  Tensor decode(const Tensor& z, Size2 target_size, Spacing target_res) const;
  Tensor decode(const LatentCode& code, Size2 target_size, Spacing target_res) const;

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::vector<Tensor> encoder_parameters() const;
  std::size_t parameter_count() const;

  /// Copies values from `tensors` (matched by name and shape) into the
  /// parameters. Every parameter must be present.
  void load_parameters(const NamedTensors& tensors);

 private:
  Tensor run_res_block(const Tensor& x, const ResBlockParams& p) const;

  ModelConfig config_;
  Tensor enc_stem_w_, enc_stem_b_;
  std::vector<ResBlockParams> enc_res_;
  std::vector<ResizeBlockParams> enc_resize_;
  Tensor mu_w_, mu_b_, logvar_w_, logvar_b_;
  Tensor dec_stem_w_, dec_stem_b_;
  std::vector<ResBlockParams> dec_res_;
  std::vector<ResizeBlockParams> dec_resize_;
  Tensor out_w_, out_b_;
};

/// z = mu + exp(logvar / 2) * eps with eps ~ N(0, 1) drawn from `rng`.
LatentCode reparameterize(const LatentDistribution& dist, Rng& rng, Spacing source_resolution = {});

/// Same, with caller-supplied eps (same shape as mu).
LatentCode reparameterize_with(const LatentDistribution& dist, const Tensor& eps, Spacing source_resolution = {});

}  // namespace resinv
