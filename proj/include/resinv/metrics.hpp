#pragma once

// Image-quality metrics and the resolution-dependent uncertainty machinery:
// SSIM-drop based information-loss table, latent noise injection and Monte
// Carlo super-resolution.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "resinv/geometry.hpp"
#include "resinv/image.hpp"
#include "resinv/model.hpp"
#include "resinv/rng.hpp"
#include "resinv/tensor.hpp"

namespace resinv {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Normalised 11-tap Gaussian (sigma 1.5).
std::span<const double> ssim_window();

/// Differentiable mean SSIM over all valid windows of all (n, c) planes of
/// two [N,C,H,W] tensors. Shape [1].
Tensor ssim_tensor(const Tensor& a, const Tensor& b, double dynamic_range);

/// Mean SSIM of two [H,W] (or equal-shape [N,C,H,W]) images.
double ssim(const Tensor& a, const Tensor& b, double dynamic_range);

/// 10 log10(L^2 / MSE). nullopt stands for +infinity (identical inputs).
std::optional<double> psnr(const Tensor& a, const Tensor& b, double dynamic_range);

struct GammaEntry {
  double factor = 1.0;
  double gamma = 0.0;
  /// Sample mean before clamping and pooling; tables read from CSV copy gamma.
  double measured = 0.0;
};

struct GammaTable {
  std::vector<GammaEntry> entries;  // strictly increasing factor
  int n_samples_used = 0;
  Spacing reference_res{1.0, 1.0};
};

using ResizeFn = std::function<Tensor(const Tensor&, Size2)>;

/// gamma(f) = mean over samples of 1 - SSIM(x, up(down(x, f))), clamped to
/// [0, 1] and made non-decreasing by pooling adjacent violators.
GammaTable estimate_gamma_table(const std::vector<ImageSample>& samples, std::span<const double> factors,
                                const ResizeFn& resize_fn, double dynamic_range = 1.0);

/// Least-squares non-decreasing fit with equal weights.
std::vector<double> isotonic_non_decreasing(std::span<const double> values);

/// Factor is the geometric mean over axes of input_res / reference_res;
/// gamma is linearly interpolated between knots and clamped at the ends.
double lookup_gamma(const GammaTable& table, Spacing input_res);

/// (1 - gamma) z + gamma eps, eps ~ N(0, 1). gamma == 0 returns z unchanged.
Tensor inject_noise(const Tensor& z, double gamma, Rng& rng);
LatentCode inject_noise(const LatentCode& code, double gamma, Rng& rng);

struct UncertaintyResult {
  Tensor mean_image;  // [H, W]
  Tensor std_map;     // [H, W]
  int n_draws = 0;
};

/// Per-pixel mean and sample standard deviation (n - 1) of equal-shape draws.
UncertaintyResult summarize_draws(const std::vector<Tensor>& draws);

/// Encode once, then per draw: reparameterise, inject gamma-scaled noise,
/// decode to the target grid. Draw d uses the substream derive_seed(seed, d),
/// so results do not depend on execution order.
UncertaintyResult mc_superresolve(const ImageSample& image, const Autoencoder& model, const GammaTable& table,
                                  Size2 target_size, Spacing target_res, int n_draws, std::uint64_t seed);

}  // namespace resinv
