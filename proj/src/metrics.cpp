#include "resinv/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "resinv/errors.hpp"
#include "resinv/ops.hpp"

namespace resinv {

std::span<const double> ssim_window() {
  static const std::array<double, kSsimWindow> window = [] {
    std::array<double, kSsimWindow> w{};
    double s = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - kSsimWindow / 2;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      s += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= s;
    return w;
  }();
  return window;
}

Tensor ssim_tensor(const Tensor& a, const Tensor& b, double dynamic_range) {
  require(a.shape() == b.shape(), "ssim: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  require(a.ndim() == 4, "ssim_tensor: expected [N,C,H,W]");
  require(dynamic_range > 0.0, "ssim: dynamic range must be positive");
  if (a.dim(2) < kSsimWindow || a.dim(3) < kSsimWindow)
    contract_fail("ssim: image " + std::to_string(a.dim(2)) + "x" + std::to_string(a.dim(3)) +
                  " smaller than the 11x11 window");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const auto win = ssim_window();
  auto blur = [&](const Tensor& t) { return ops::separable_filter_valid(t, win); };

  const Tensor mu_a = blur(a), mu_b = blur(b);
  const Tensor mu_aa = ops::mul(mu_a, mu_a), mu_bb = ops::mul(mu_b, mu_b), mu_ab = ops::mul(mu_a, mu_b);
  const Tensor s_aa = ops::sub(blur(ops::mul(a, a)), mu_aa);
  const Tensor s_bb = ops::sub(blur(ops::mul(b, b)), mu_bb);
  const Tensor s_ab = ops::sub(blur(ops::mul(a, b)), mu_ab);
  const Tensor num = ops::mul(ops::add_scalar(ops::scalar_mul(mu_ab, 2.0), c1),
                              ops::add_scalar(ops::scalar_mul(s_ab, 2.0), c2));
  const Tensor den = ops::mul(ops::add_scalar(ops::add(mu_aa, mu_bb), c1), ops::add_scalar(ops::add(s_aa, s_bb), c2));
  return ops::mean(ops::div(num, den));
}

double ssim(const Tensor& a, const Tensor& b, double dynamic_range) {
  require(a.shape() == b.shape(), "ssim: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  NoGradGuard guard;
  if (a.ndim() == 2) return ssim_tensor(as_batch(a), as_batch(b), dynamic_range).item();
  return ssim_tensor(a, b, dynamic_range).item();
}

std::optional<double> psnr(const Tensor& a, const Tensor& b, double dynamic_range) {
  require(a.shape() == b.shape(), "psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  require(dynamic_range > 0.0, "psnr: dynamic range must be positive");
  const auto x = a.data(), y = b.data();
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(dynamic_range * dynamic_range / mse);
}

std::vector<double> isotonic_non_decreasing(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block last = blocks.back();
      blocks.pop_back();
      blocks.back().sum += last.sum;
      blocks.back().count += last.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

GammaTable estimate_gamma_table(const std::vector<ImageSample>& samples, std::span<const double> factors,
                                const ResizeFn& resize_fn, double dynamic_range) {
  require(!samples.empty(), "estimate_gamma_table: empty sample list");
  require(!factors.empty(), "estimate_gamma_table: no factors");
  std::vector<double> fs(factors.begin(), factors.end());
  for (double f : fs) require(f >= 1.0, "estimate_gamma_table: factors must be >= 1");
  std::sort(fs.begin(), fs.end());
  require(std::adjacent_find(fs.begin(), fs.end()) == fs.end(), "estimate_gamma_table: duplicate factors");
  require(fs.front() == 1.0, "estimate_gamma_table: factors must include 1.0");

  NoGradGuard guard;
  std::vector<double> measured, gammas;
  for (double f : fs) {
    double total = 0.0;
    for (const ImageSample& s : samples) {
      const Size2 size = s.size();
      const Size2 low{std::max(1, static_cast<int>(std::lround(size.h / f))),
                      std::max(1, static_cast<int>(std::lround(size.w / f)))};
      const Tensor x = as_batch(s.pixels);
      const Tensor round_trip = resize_fn(resize_fn(x, low), size);
      total += 1.0 - ssim_tensor(x, round_trip, dynamic_range).item();
    }
    measured.push_back(total / static_cast<double>(samples.size()));
    gammas.push_back(std::clamp(measured.back(), 0.0, 1.0));
  }
  const auto iso = isotonic_non_decreasing(gammas);
  GammaTable table;
  table.n_samples_used = static_cast<int>(samples.size());
  table.reference_res = samples.front().resolution;
  for (std::size_t i = 0; i < fs.size(); ++i) table.entries.push_back({fs[i], iso[i], measured[i]});
  return table;
}

double lookup_gamma(const GammaTable& table, Spacing input_res) {
  require(!table.entries.empty(), "lookup_gamma: empty table");
  const double f =
      std::sqrt((input_res.y / table.reference_res.y) * (input_res.x / table.reference_res.x));
  const auto& e = table.entries;
  if (f <= e.front().factor) return e.front().gamma;
  if (f >= e.back().factor) return e.back().gamma;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    if (f == e[i].factor) return e[i].gamma;
    if (f < e[i + 1].factor) {
      const double t = (f - e[i].factor) / (e[i + 1].factor - e[i].factor);
      return e[i].gamma + t * (e[i + 1].gamma - e[i].gamma);
    }
  }
  return e.back().gamma;
}

Tensor inject_noise(const Tensor& z, double gamma, Rng& rng) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) contract_fail("inject_noise: gamma " + std::to_string(gamma) + " outside [0,1]");
  if (gamma == 0.0) return z;
  std::vector<double> eps = rng.normals(z.numel());
  for (double& v : eps) v *= gamma;
  return ops::add(ops::scalar_mul(z, 1.0 - gamma), Tensor::from(z.shape(), std::move(eps)));
}

LatentCode inject_noise(const LatentCode& code, double gamma, Rng& rng) {
  return {inject_noise(code.z, gamma, rng), code.source_resolution, gamma};
}

UncertaintyResult summarize_draws(const std::vector<Tensor>& draws) {
  require(draws.size() >= 2, "uncertainty summary needs at least 2 draws");
  const Shape shape = draws.front().shape();
  const std::size_t n = draws.front().numel();
  std::vector<double> mean(n, 0.0), var(n, 0.0);
  for (const Tensor& d : draws) {
    require(d.shape() == shape, "uncertainty summary: draws differ in shape");
    for (std::size_t i = 0; i < n; ++i) mean[i] += d.data()[i];
  }
  const double count = static_cast<double>(draws.size());
  for (double& m : mean) m /= count;
  for (const Tensor& d : draws)
    for (std::size_t i = 0; i < n; ++i) {
      const double r = d.data()[i] - mean[i];
      var[i] += r * r;
    }
  for (double& v : var) v = std::sqrt(v / (count - 1.0));
  return {Tensor::from(shape, std::move(mean)), Tensor::from(shape, std::move(var)), static_cast<int>(draws.size())};
}

UncertaintyResult mc_superresolve(const ImageSample& image, const Autoencoder& model, const GammaTable& table,
                                  Size2 target_size, Spacing target_res, int n_draws, std::uint64_t seed) {
  require(n_draws >= 2, "mc_superresolve: n_draws must be >= 2");
  NoGradGuard guard;
  const LatentDistribution dist = model.encode(image);
  const double gamma = lookup_gamma(table, image.resolution);
  std::vector<Tensor> draws;
  draws.reserve(static_cast<std::size_t>(n_draws));
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    LatentCode code = reparameterize(dist, rng, image.resolution);
    code = inject_noise(code, gamma, rng);
    draws.push_back(image_at(model.decode(code, target_size, target_res), 0));
  }
  return summarize_draws(draws);
}

}  // namespace resinv
