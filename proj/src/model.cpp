#include "resinv/model.hpp"

#include <cmath>

#include "resinv/errors.hpp"
#include "resinv/ops.hpp"

namespace resinv {

namespace {

constexpr double kLogvarMin = -60.0;
constexpr double kLogvarMax = 20.0;

int norm_groups(std::size_t channels) { return channels % 8 == 0 ? static_cast<int>(channels / 8) : 1; }

ResBlockParams make_res_block(std::size_t cin, std::size_t cout, Rng& rng) {
  ResBlockParams p;
  p.conv1_w = init_conv_weight(cout, cin, 3, rng);
  p.conv1_b = Tensor::zeros({cout}, true);
  p.norm_g = Tensor::full({cout}, 1.0, true);
  p.norm_b = Tensor::zeros({cout}, true);
  p.conv2_w = init_conv_weight(cout, cout, 3, rng);
  p.conv2_b = Tensor::zeros({cout}, true);
  if (cin != cout) {
    p.skip_w = init_conv_weight(cout, cin, 1, rng);
    p.skip_b = Tensor::zeros({cout}, true);
  }
  return p;
}

void push_res(NamedTensors& out, const std::string& prefix, const ResBlockParams& p) {
  out.emplace_back(prefix + ".conv1.w", p.conv1_w);
  out.emplace_back(prefix + ".conv1.b", p.conv1_b);
  out.emplace_back(prefix + ".norm.g", p.norm_g);
  out.emplace_back(prefix + ".norm.b", p.norm_b);
  out.emplace_back(prefix + ".conv2.w", p.conv2_w);
  out.emplace_back(prefix + ".conv2.b", p.conv2_b);
  if (p.skip_w.defined()) {
    out.emplace_back(prefix + ".skip.w", p.skip_w);
    out.emplace_back(prefix + ".skip.b", p.skip_b);
  }
}

void push_resize(NamedTensors& out, const std::string& prefix, const ResizeBlockParams& p) {
  out.emplace_back(prefix + ".pre1.w", p.pre1_w);
  out.emplace_back(prefix + ".pre1.b", p.pre1_b);
  out.emplace_back(prefix + ".pre2.w", p.pre2_w);
  out.emplace_back(prefix + ".pre2.b", p.pre2_b);
  out.emplace_back(prefix + ".post.w", p.post_w);
  out.emplace_back(prefix + ".post.b", p.post_b);
}

}  // namespace

Spacing ModelConfig::latent_res() const {
  const double f = std::ldexp(1.0, n_layers);
  return highest_train_res.scaled(f);
}

Size2 ModelConfig::reference_size() const {
  const int f = 1 << n_layers;
  return {latent_grid.h * f, latent_grid.w * f};
}

std::vector<std::size_t> ModelConfig::encoder_channels() const {
  std::vector<std::size_t> c;
  for (int k = 0; k < n_layers; ++k) c.push_back(static_cast<std::size_t>(base_channels) << k);
  return c;
}

void ModelConfig::validate() const {
  require(n_layers >= 1 && n_layers <= 8, "model config: n_layers must be in [1, 8]");
  require(base_channels >= 1, "model config: base_channels must be >= 1");
  require(latent_channels >= 1, "model config: latent_channels must be >= 1");
  require(latent_grid.h >= 1 && latent_grid.w >= 1, "model config: latent_grid must be >= 1");
  require(highest_train_res.y > 0 && highest_train_res.x > 0, "model config: highest_train_res must be positive");
}

Autoencoder::Autoencoder(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto ch = config_.encoder_channels();
  const std::size_t lat = static_cast<std::size_t>(config_.latent_channels);
  const std::size_t n = ch.size();

  enc_stem_w_ = init_conv_weight(ch[0], 1, 3, rng);
  enc_stem_b_ = Tensor::zeros({ch[0]}, true);
  for (std::size_t k = 0; k < n; ++k) {
    enc_res_.push_back(make_res_block(k == 0 ? ch[0] : ch[k - 1], ch[k], rng));
    enc_resize_.push_back(ResizeBlockParams::init(ch[k], rng));
  }
  mu_w_ = init_conv_weight(lat, ch[n - 1], 1, rng);
  mu_b_ = Tensor::zeros({lat}, true);
  logvar_w_ = init_conv_weight(lat, ch[n - 1], 1, rng);
  logvar_b_ = Tensor::zeros({lat}, true);

  dec_stem_w_ = init_conv_weight(ch[n - 1], lat, 3, rng);
  dec_stem_b_ = Tensor::zeros({ch[n - 1]}, true);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cin = k == 0 ? ch[n - 1] : ch[n - k];
    const std::size_t cout = ch[n - 1 - k];
    dec_res_.push_back(make_res_block(cin, cout, rng));
    dec_resize_.push_back(ResizeBlockParams::init(cout, rng));
  }
  out_w_ = init_conv_weight(1, ch[0], 1, rng);
  out_b_ = Tensor::zeros({1}, true);
}

ResizePlan Autoencoder::encode_plan(Size2 input_size, Spacing input_res) const {
  if (config_.resize_mode == ResizeMode::fixed_factor)
    return fixed_factor_plan(input_size, config_.latent_grid, config_.n_layers, Direction::encode);
  return compute_resize_plan(input_size, input_res, config_.latent_grid, config_.latent_res(), config_.n_layers);
}

ResizePlan Autoencoder::decode_plan(Size2 target_size, Spacing target_res) const {
  if (config_.resize_mode == ResizeMode::fixed_factor)
    return fixed_factor_plan(target_size, config_.latent_grid, config_.n_layers, Direction::decode);
  return compute_decode_plan(config_.latent_grid, config_.latent_res(), target_size, target_res, config_.n_layers);
}

Tensor Autoencoder::run_res_block(const Tensor& x, const ResBlockParams& p) const {
  Tensor h = ops::conv2d(x, p.conv1_w, p.conv1_b, 1);
  h = ops::group_norm(h, p.norm_g, p.norm_b, norm_groups(h.dim(1)));
  h = ops::silu(h);
  h = ops::conv2d(h, p.conv2_w, p.conv2_b, 1);
  Tensor skip = p.skip_w.defined() ? ops::conv2d(x, p.skip_w, p.skip_b, 0) : x;
  return ops::add(h, skip);
}

LatentDistribution Autoencoder::encode(const Tensor& images, Spacing res) const {
  require(images.ndim() == 4 && images.dim(1) == 1,
          "encode: expected [N,1,H,W] images, got " + shape_str(images.shape()));
  if (!coarser_or_equal(res, config_.highest_train_res))
    contract_fail("encode: input resolution " + res.str() + " is finer than reference resolution " +
                  config_.highest_train_res.str() + "; finer than reference resolution is out of the trained domain");
  const Size2 size{static_cast<int>(images.dim(2)), static_cast<int>(images.dim(3))};
  const ResizePlan plan = encode_plan(size, res);

  Tensor h = ops::conv2d(images, enc_stem_w_, enc_stem_b_, 1);
  for (std::size_t k = 0; k < enc_res_.size(); ++k) {
    h = run_res_block(h, enc_res_[k]);
    h = learnable_resize_block(h, plan.layer_sizes[k + 1], enc_resize_[k]);
  }
  LatentDistribution d;
  d.mu = ops::conv2d(h, mu_w_, mu_b_, 0);
  d.logvar = ops::clamp(ops::conv2d(h, logvar_w_, logvar_b_, 0), kLogvarMin, kLogvarMax);
  return d;
}

LatentDistribution Autoencoder::encode(const ImageSample& image) const {
  return encode(as_batch(image.pixels), image.resolution);
}

Tensor Autoencoder::decode(const Tensor& z, Size2 target_size, Spacing target_res) const {
  require(z.ndim() == 4 && z.dim(1) == static_cast<std::size_t>(config_.latent_channels),
          "decode: expected [N," + std::to_string(config_.latent_channels) + ",h,w] latent, got " +
              shape_str(z.shape()));
  const Size2 grid{static_cast<int>(z.dim(2)), static_cast<int>(z.dim(3))};
  if (!(grid == config_.latent_grid))
    contract_fail("decode: latent grid " + grid.str() + " differs from configured " + config_.latent_grid.str());
  require(target_size.h >= 1 && target_size.w >= 1, "decode: invalid target size " + target_size.str());
  if (!coarser_or_equal(target_res, config_.highest_train_res))
    contract_fail("decode: target resolution " + target_res.str() + " is finer than reference resolution " +
                  config_.highest_train_res.str());
  const ResizePlan plan = decode_plan(target_size, target_res);

  Tensor h = ops::conv2d(z, dec_stem_w_, dec_stem_b_, 1);
  for (std::size_t k = 0; k < dec_res_.size(); ++k) {
    h = run_res_block(h, dec_res_[k]);
    h = learnable_resize_block(h, plan.layer_sizes[k + 1], dec_resize_[k]);
  }
  return ops::conv2d(h, out_w_, out_b_, 0);
}

Tensor Autoencoder::decode(const LatentCode& code, Size2 target_size, Spacing target_res) const {
  return decode(code.z, target_size, target_res);
}

NamedTensors Autoencoder::named_parameters() const {
  NamedTensors out;
  out.emplace_back("enc.stem.w", enc_stem_w_);
  out.emplace_back("enc.stem.b", enc_stem_b_);
  for (std::size_t k = 0; k < enc_res_.size(); ++k) {
    push_res(out, "enc.layer" + std::to_string(k) + ".res", enc_res_[k]);
    push_resize(out, "enc.layer" + std::to_string(k) + ".resize", enc_resize_[k]);
  }
  out.emplace_back("enc.mu.w", mu_w_);
  out.emplace_back("enc.mu.b", mu_b_);
  out.emplace_back("enc.logvar.w", logvar_w_);
  out.emplace_back("enc.logvar.b", logvar_b_);
  out.emplace_back("dec.stem.w", dec_stem_w_);
  out.emplace_back("dec.stem.b", dec_stem_b_);
  for (std::size_t k = 0; k < dec_res_.size(); ++k) {
    push_res(out, "dec.layer" + std::to_string(k) + ".res", dec_res_[k]);
    push_resize(out, "dec.layer" + std::to_string(k) + ".resize", dec_resize_[k]);
  }
  out.emplace_back("dec.out.w", out_w_);
  out.emplace_back("dec.out.b", out_b_);
  return out;
}

std::vector<Tensor> Autoencoder::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<Tensor> Autoencoder::encoder_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters())
    if (name.rfind("enc.", 0) == 0) out.push_back(t);
  return out;
}

std::size_t Autoencoder::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

void Autoencoder::load_parameters(const NamedTensors& tensors) {
  for (auto& [name, param] : named_parameters()) {
    const Tensor* src = nullptr;
    for (const auto& [n, t] : tensors)
      if (n == name) src = &t;
    if (!src) contract_fail("checkpoint is missing parameter " + name);
    if (src->shape() != param.shape())
      contract_fail("checkpoint parameter " + name + " has shape " + shape_str(src->shape()) + ", model expects " +
                    shape_str(param.shape()));
    Tensor dst = param;
    auto d = dst.mutable_data();
    std::copy(src->data().begin(), src->data().end(), d.begin());
  }
}

LatentCode reparameterize_with(const LatentDistribution& dist, const Tensor& eps, Spacing source_resolution) {
  require(eps.shape() == dist.mu.shape(), "reparameterize: noise shape differs from mu");
  Tensor stddev = ops::exp(ops::scalar_mul(dist.logvar, 0.5));
  return {ops::add(dist.mu, ops::mul(stddev, eps)), source_resolution, 0.0};
}

LatentCode reparameterize(const LatentDistribution& dist, Rng& rng, Spacing source_resolution) {
  Tensor eps = Tensor::from(dist.mu.shape(), rng.normals(dist.mu.numel()));
  return reparameterize_with(dist, eps, source_resolution);
}

}  // namespace resinv
