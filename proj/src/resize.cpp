#include "resinv/resize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "resinv/errors.hpp"
#include "resinv/ops.hpp"

namespace resinv {

std::string ResizePlan::dump() const {
  std::ostringstream os;
  os << (direction == Direction::encode ? "encode" : "decode") << " plan: ";
  for (std::size_t k = 0; k < layer_sizes.size(); ++k) os << (k ? " -> " : "") << layer_sizes[k].str();
  os << " (axis factor " << axis_factor[0] << "," << axis_factor[1] << ")";
  return os.str();
}

namespace {

std::vector<int> geometric_sizes(int s0, int sn, int n) {
  std::vector<int> sizes(static_cast<std::size_t>(n) + 1);
  sizes[0] = s0;
  const double ratio = static_cast<double>(sn) / static_cast<double>(s0);
  for (int k = 1; k < n; ++k)
    sizes[static_cast<std::size_t>(k)] =
        static_cast<int>(std::lround(s0 * std::pow(ratio, static_cast<double>(k) / static_cast<double>(n))));
  sizes[static_cast<std::size_t>(n)] = sn;
  return sizes;
}

void fill_ratios(ResizePlan& plan) {
  plan.layer_ratios.clear();
  for (std::size_t k = 0; k + 1 < plan.layer_sizes.size(); ++k) {
    const Size2 a = plan.layer_sizes[k], b = plan.layer_sizes[k + 1];
    if (plan.direction == Direction::encode)
      plan.layer_ratios.push_back({static_cast<double>(a.h) / b.h, static_cast<double>(a.w) / b.w});
    else
      plan.layer_ratios.push_back({static_cast<double>(b.h) / a.h, static_cast<double>(b.w) / a.w});
  }
}

void check_plan(const ResizePlan& plan) {
  for (const Size2& s : plan.layer_sizes)
    if (s.h < 1 || s.w < 1) contract_fail("zero-size layer after rounding: " + plan.dump());
}

}  // namespace

ResizePlan compute_resize_plan(Size2 input_size, Spacing input_res, Size2 latent_size, Spacing latent_res,
                               int n_layers) {
  require(n_layers >= 1, "compute_resize_plan: n_layers must be >= 1");
  require(input_size.h >= 1 && input_size.w >= 1 && latent_size.h >= 1 && latent_size.w >= 1,
          "compute_resize_plan: sizes must be >= 1");
  require(input_res.y > 0 && input_res.x > 0 && latent_res.y > 0 && latent_res.x > 0,
          "compute_resize_plan: resolutions must be positive");
  if (!coarser_or_equal(latent_res, input_res))
    contract_fail("compute_resize_plan: input resolution " + input_res.str() + " is coarser than latent resolution " +
                  latent_res.str());
  if (latent_size.h > input_size.h || latent_size.w > input_size.w)
    contract_fail("compute_resize_plan: latent grid " + latent_size.str() + " larger than input " + input_size.str());

  ResizePlan plan;
  plan.direction = Direction::encode;
  const double inv_n = 1.0 / static_cast<double>(n_layers);
  plan.axis_factor = {std::pow(latent_res.y / input_res.y, inv_n), std::pow(latent_res.x / input_res.x, inv_n)};
  const auto hs = geometric_sizes(input_size.h, latent_size.h, n_layers);
  const auto ws = geometric_sizes(input_size.w, latent_size.w, n_layers);
  for (std::size_t k = 0; k < hs.size(); ++k) plan.layer_sizes.push_back({hs[k], ws[k]});
  check_plan(plan);
  fill_ratios(plan);
  return plan;
}

ResizePlan compute_decode_plan(Size2 latent_size, Spacing latent_res, Size2 target_size, Spacing target_res,
                               int n_layers) {
  ResizePlan plan = compute_resize_plan(target_size, target_res, latent_size, latent_res, n_layers);
  plan.direction = Direction::decode;
  std::reverse(plan.layer_sizes.begin(), plan.layer_sizes.end());
  fill_ratios(plan);
  return plan;
}

ResizePlan fixed_factor_plan(Size2 image_size, Size2 latent_size, int n_layers, Direction direction) {
  require(n_layers >= 1, "fixed_factor_plan: n_layers must be >= 1");
  ResizePlan plan;
  plan.direction = Direction::encode;
  plan.axis_factor = {2.0, 2.0};
  Size2 s = image_size;
  plan.layer_sizes.push_back(s);
  for (int k = 0; k < n_layers; ++k) {
    s = {static_cast<int>(std::lround(s.h / 2.0)), static_cast<int>(std::lround(s.w / 2.0))};
    plan.layer_sizes.push_back(s);
  }
  check_plan(plan);
  if (!(plan.layer_sizes.back() == latent_size))
    contract_fail("fixed-factor model only accepts images that halve onto the latent grid: " + plan.dump() +
                  " vs latent " + latent_size.str());
  if (direction == Direction::decode) {
    plan.direction = Direction::decode;
    std::reverse(plan.layer_sizes.begin(), plan.layer_sizes.end());
  }
  fill_ratios(plan);
  return plan;
}

Tensor init_conv_weight(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(cin * k * k));
  std::vector<double> w(cout * cin * k * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return Tensor::from({cout, cin, k, k}, std::move(w), true);
}

ResizeBlockParams ResizeBlockParams::init(std::size_t channels, Rng& rng) {
  ResizeBlockParams p;
  p.pre1_w = init_conv_weight(channels, channels, 3, rng);
  p.pre1_b = Tensor::zeros({channels}, true);
  p.pre2_w = init_conv_weight(channels, channels, 3, rng);
  p.pre2_b = Tensor::zeros({channels}, true);
  // Zero residual at init: the block starts out as plain bilinear resizing.
  p.post_w = Tensor::zeros({channels, channels, 3, 3}, true);
  p.post_b = Tensor::zeros({channels}, true);
  return p;
}

std::vector<Tensor> ResizeBlockParams::tensors() const { return {pre1_w, pre1_b, pre2_w, pre2_b, post_w, post_b}; }

Tensor learnable_resize_block(const Tensor& x, Size2 target, const ResizeBlockParams& p) {
  Tensor skip = ops::interp_resize(x, target);
  Tensor r = ops::conv2d(x, p.pre1_w, p.pre1_b, 1);
  r = ops::leaky_relu(r, 0.2);
  r = ops::conv2d(r, p.pre2_w, p.pre2_b, 1);
  r = ops::interp_resize(r, target);
  r = ops::conv2d(r, p.post_w, p.post_b, 1);
  return ops::add(skip, r);
}

}  // namespace resinv
