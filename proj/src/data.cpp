#include "resinv/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "resinv/errors.hpp"
#include "resinv/ops.hpp"
#include "resinv/rng.hpp"

namespace resinv {

Tensor stack_images(const std::vector<ImageSample>& samples) {
  require(!samples.empty(), "stack_images: empty batch");
  const Size2 s = samples.front().size();
  std::vector<double> data;
  data.reserve(samples.size() * static_cast<std::size_t>(s.h * s.w));
  for (const auto& img : samples) {
    require(img.size() == s, "stack_images: mixed image sizes in one batch");
    data.insert(data.end(), img.pixels.data().begin(), img.pixels.data().end());
  }
  return Tensor::from({samples.size(), 1, static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)},
                      std::move(data));
}

Tensor image_at(const Tensor& batch, std::size_t n) {
  require(batch.ndim() == 4 && n < batch.dim(0), "image_at: index out of range");
  const std::size_t h = batch.dim(2), w = batch.dim(3);
  const auto d = batch.data();
  const std::size_t off = n * batch.dim(1) * h * w;
  return Tensor::from({h, w}, std::vector<double>(d.begin() + off, d.begin() + off + h * w));
}

Tensor as_batch(const Tensor& image) {
  require(image.ndim() == 2, "as_batch: expected [H,W], got " + shape_str(image.shape()));
  return Tensor::from({1, 1, image.dim(0), image.dim(1)}, std::vector<double>(image.data().begin(), image.data().end()));
}

namespace {

ImageSample render(const SyntheticDataset& cfg, int index) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const int H = cfg.size.h, W = cfg.size.w;
  const int label = cfg.class_count > 1 ? index % cfg.class_count : 0;

  const double gy = rng.uniform(-0.1, 0.1), gx = rng.uniform(-0.1, 0.1), base = rng.uniform(0.25, 0.35);
  std::vector<double> px(static_cast<std::size_t>(H * W));
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      px[static_cast<std::size_t>(y * W + x)] = base + gy * (y / double(H) - 0.5) + gx * (x / double(W) - 0.5);

  const int n_shapes = cfg.shapes_min + static_cast<int>(rng.index(static_cast<std::size_t>(cfg.shapes_max - cfg.shapes_min + 1)));
  for (int s = 0; s < n_shapes; ++s) {
    const bool ellipse = rng.uniform(0.0, 1.0) < 0.5;
    const double cy = rng.uniform(0.2, 0.8) * H, cx = rng.uniform(0.2, 0.8) * W;
    const double ry = rng.uniform(0.08, 0.25) * H, rx = rng.uniform(0.08, 0.25) * W;
    const double level = rng.uniform(0.35, 0.75);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0 : std::fabs(dy) <= 1.0 && std::fabs(dx) <= 1.0;
        if (inside) px[static_cast<std::size_t>(y * W + x)] = level;
      }
  }

  bool fine = label == 1;
  if (cfg.class_count <= 1) fine = rng.uniform(0.0, 1.0) < 0.5;
  const double lambda = fine ? rng.uniform(cfg.fine_wavelength_min, cfg.fine_wavelength_max)
                             : rng.uniform(cfg.coarse_wavelength_min, cfg.coarse_wavelength_max);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = rng.uniform(cfg.texture_amplitude_min, cfg.texture_amplitude_max);
  const double ky = std::sin(theta) * 2.0 * std::numbers::pi / lambda;
  const double kx = std::cos(theta) * 2.0 * std::numbers::pi / lambda;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double& v = px[static_cast<std::size_t>(y * W + x)];
      v = std::clamp(v + amp * std::sin(ky * y + kx * x + phase), 0.0, 1.0);
    }

  ImageSample out;
  out.pixels = Tensor::from({static_cast<std::size_t>(H), static_cast<std::size_t>(W)}, std::move(px));
  out.resolution = cfg.resolution;
  out.label = label;
  return out;
}

}  // namespace

std::vector<ImageSample> generate_synthetic(const SyntheticDataset& config, int n) {
  require(n >= 1, "generate_synthetic: n must be >= 1");
  require(config.class_count >= 1, "generate_synthetic: class_count must be >= 1");
  require(config.size.h >= 1 && config.size.w >= 1, "generate_synthetic: invalid image size");
  require(config.shapes_min >= 0 && config.shapes_max >= config.shapes_min, "generate_synthetic: invalid shape count");
  std::vector<ImageSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(render(config, i));
  return out;
}

ImageSample resample_to(const ImageSample& sample, Size2 size) {
  const Size2 s = sample.size();
  NoGradGuard guard;
  ImageSample out;
  out.pixels = image_at(ops::interp_resize(as_batch(sample.pixels), size), 0);
  out.resolution = {sample.resolution.y * s.h / size.h, sample.resolution.x * s.w / size.w};
  out.label = sample.label;
  return out;
}

ImageSample degrade(const ImageSample& sample, double factor) {
  require(factor >= 1.0, "degrade: factor must be >= 1");
  const Size2 s = sample.size();
  return resample_to(sample, {std::max(1, static_cast<int>(std::lround(s.h / factor))),
                              std::max(1, static_cast<int>(std::lround(s.w / factor)))});
}

}  // namespace resinv
