#include "resinv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resinv/data.hpp"
#include "resinv/errors.hpp"
#include "resinv/io.hpp"
#include "resinv/ops.hpp"

namespace resinv {

void TrainConfig::validate() const {
  require(steps >= 1, "train config: steps must be >= 1");
  require(batch_size >= 1, "train config: batch_size must be >= 1");
  require(lr > 0.0, "train config: lr must be positive");
  require(lr_factor_min >= 1.0 && lr_factor_max >= lr_factor_min,
          "train config: factor range must satisfy 1 <= min <= max");
  require(checkpoint_every >= 0, "train config: checkpoint_every must be >= 0");
  weights.validate();
}

namespace {

LossReport baseline_step(const Tensor& x_hr, Spacing ref, Autoencoder& model, const TrainConfig& config, Rng& rng,
                         OptimizerState& state) {
  const Size2 size{static_cast<int>(x_hr.dim(2)), static_cast<int>(x_hr.dim(3))};
  const LatentDistribution dist = model.encode(x_hr, ref);
  const LatentCode z = reparameterize(dist, rng, ref);
  const Tensor rec = model.decode(z, size, ref);
  const auto& w = config.weights;
  LossReport r;
  std::vector<std::pair<LossTerm, Tensor>> parts;
  auto add = [&](const char* name, double weight, Tensor t) { parts.push_back({{name, t.item(), weight}, std::move(t)}); };
  add("l1_hr_hr", w.w_rec_l1, l1_loss(rec, x_hr));
  add("perc_hr_hr", w.w_perc, ssim_loss(rec, x_hr));
  add("kl_hr", w.w_kl, kl_loss(dist));
  Tensor total;
  for (auto& [term, t] : parts) {
    r.terms.push_back(term);
    r.total += term.weight * term.value;
    Tensor scaled = ops::scalar_mul(t, term.weight);
    total = total.defined() ? ops::add(total, scaled) : scaled;
  }
  r.total_tensor = total;
  auto params = model.parameters();
  zero_grads(params);
  backward(r.total_tensor);
  adam_step(params, state);
  return r;
}

}  // namespace

LossReport train_step(const std::vector<ImageSample>& batch, Autoencoder& model, const GammaTable& table,
                      const TrainConfig& config, Rng& rng, OptimizerState& state) {
  require(!batch.empty(), "train_step: empty batch");
  const Spacing ref = model.config().highest_train_res;
  for (const auto& s : batch)
    if (!(std::fabs(s.resolution.y - ref.y) <= 1e-9 * ref.y && std::fabs(s.resolution.x - ref.x) <= 1e-9 * ref.x))
      contract_fail("train_step: batch must be at the reference resolution " + ref.str());
  const Tensor x_hr = stack_images(batch);
  if (model.config().resize_mode == ResizeMode::fixed_factor) return baseline_step(x_hr, ref, model, config, rng, state);

  const Size2 size{static_cast<int>(x_hr.dim(2)), static_cast<int>(x_hr.dim(3))};
  const double f =
      config.lr_factor_max > config.lr_factor_min ? rng.uniform(config.lr_factor_min, config.lr_factor_max) : config.lr_factor_min;
  const Size2 lr_size{std::max(1, static_cast<int>(std::lround(size.h / f))),
                      std::max(1, static_cast<int>(std::lround(size.w / f)))};
  const Spacing lr_res{ref.y * size.h / lr_size.h, ref.x * size.w / lr_size.w};
  Tensor x_lr;
  {
    NoGradGuard guard;
    x_lr = ops::interp_resize(x_hr, lr_size);
  }

  TrainingBranches b;
  b.x_hr = x_hr;
  b.x_lr = x_lr;
  b.hr_latent = model.encode(x_hr, ref);
  b.lr_latent = model.encode(x_lr, lr_res);
  const LatentCode z_hr = reparameterize(b.hr_latent, rng, ref);
  LatentCode z_lr = reparameterize(b.lr_latent, rng, lr_res);
  if (config.gamma_in_training && !table.entries.empty()) z_lr = inject_noise(z_lr, lookup_gamma(table, lr_res), rng);
  b.hr_from_hr = model.decode(z_hr, size, ref);
  b.lr_from_lr = model.decode(z_lr, lr_size, lr_res);
  b.hr_from_lr = model.decode(z_lr, size, ref);

  LossReport report = total_training_loss(b, config.weights);
  auto params = model.parameters();
  zero_grads(params);
  backward(report.total_tensor);
  adam_step(params, state);
  return report;
}

Trainer::Trainer(Autoencoder& model, const std::vector<ImageSample>& corpus, GammaTable table, TrainConfig config)
    : model_(model),
      corpus_(corpus),
      table_(std::move(table)),
      config_(config),
      rng_(derive_seed(config.seed, 1)),
      order_rng_(derive_seed(config.seed, 2)) {
  config_.validate();
  require(!corpus_.empty(), "Trainer: empty corpus");
  state_ = make_optimizer_state(model_.parameters(), AdamOptions{config_.lr, 0.9, 0.999, 1e-8});
  order_.resize(corpus_.size());
}

std::vector<ImageSample> Trainer::next_batch() {
  std::vector<ImageSample> batch;
  for (int i = 0; i < config_.batch_size; ++i) {
    if (cursor_ == 0) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      // Fisher-Yates with our own index draws keeps the order independent of
      // the standard library's shuffle algorithm.
      for (std::size_t j = order_.size(); j > 1; --j) std::swap(order_[j - 1], order_[order_rng_.index(j)]);
    }
    batch.push_back(corpus_[order_[cursor_]]);
    cursor_ = (cursor_ + 1) % order_.size();
  }
  return batch;
}

LossReport Trainer::step() {
  const auto batch = next_batch();
  LossReport r = train_step(batch, model_, table_, config_, rng_, state_);
  ++steps_done_;
  return r;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "spearman: need two equal-length series of length >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<SuperresRow> evaluate_superres(const Autoencoder& model, const GammaTable& table,
                                           const std::vector<ImageSample>& test_set, std::span<const double> factors,
                                           int n_draws, std::uint64_t seed, double dynamic_range) {
  require(!test_set.empty(), "evaluate_superres: empty test set");
  std::vector<SuperresRow> rows;
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    SuperresRow row;
    row.factor = factors[fi];
    double se = 0.0, se_base = 0.0, count = 0.0, ssim_sum = 0.0, std_sum = 0.0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const ImageSample& gt = test_set[i];
      const ImageSample low = degrade(gt, row.factor);
      const auto result = mc_superresolve(low, model, table, gt.size(), gt.resolution, n_draws,
                                          derive_seed(seed, fi * 1000003ULL + i));
      const ImageSample base = resample_to(low, gt.size());
      const auto g = gt.pixels.data(), m = result.mean_image.data(), bl = base.pixels.data();
      for (std::size_t p = 0; p < g.size(); ++p) {
        se += (m[p] - g[p]) * (m[p] - g[p]);
        se_base += (bl[p] - g[p]) * (bl[p] - g[p]);
      }
      count += static_cast<double>(g.size());
      ssim_sum += ssim(result.mean_image, gt.pixels, dynamic_range);
      double s = 0.0;
      for (double v : result.std_map.data()) s += v;
      s /= static_cast<double>(result.std_map.numel());
      row.per_image_std.push_back(s);
      std_sum += s;
    }
    const double L2 = dynamic_range * dynamic_range;
    if (se > 0.0) row.psnr = 10.0 * std::log10(L2 / (se / count));
    if (se_base > 0.0) row.baseline_psnr = 10.0 * std::log10(L2 / (se_base / count));
    row.ssim = ssim_sum / static_cast<double>(test_set.size());
    row.mean_std = std_sum / static_cast<double>(test_set.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "auroc: scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, "auroc: labels must be 0 or 1");
    (l == 1 ? pos : neg)++;
  }
  require(pos > 0 && neg > 0, "auroc: test set must contain both classes");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (labels[i] == 1) rank_sum += ranks[i];
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

LatentClassifier::LatentClassifier(std::size_t latent_channels, int hidden, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t h = static_cast<std::size_t>(hidden);
  c1_w_ = init_conv_weight(h, latent_channels, 3, rng);
  c1_b_ = Tensor::zeros({h}, true);
  c2_w_ = init_conv_weight(h, h, 3, rng);
  c2_b_ = Tensor::zeros({h}, true);
  std::vector<double> fc(2 * h);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& v : fc) v = rng.uniform(-bound, bound);
  fc_w_ = Tensor::from({2, h}, std::move(fc), true);
  fc_b_ = Tensor::zeros({2}, true);
}

Tensor LatentClassifier::logits(const Tensor& latents) const {
  Tensor h = ops::silu(ops::conv2d(latents, c1_w_, c1_b_, 1));
  h = ops::silu(ops::conv2d(h, c2_w_, c2_b_, 1));
  return ops::linear(ops::global_avg_pool(h), fc_w_, fc_b_);
}

std::vector<double> LatentClassifier::scores(const Tensor& latents) const {
  NoGradGuard guard;
  const auto p = ops::softmax_rows(logits(latents));
  std::vector<double> s(latents.dim(0));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = p[i * 2 + 1];
  return s;
}

std::vector<Tensor> LatentClassifier::parameters() const { return {c1_w_, c1_b_, c2_w_, c2_b_, fc_w_, fc_b_}; }

Tensor encode_for_downstream(const Autoencoder& model, const ImageSample& image) {
  NoGradGuard guard;
  if (model.config().resize_mode == ResizeMode::fixed_factor) {
    const Size2 ref = model.config().reference_size();
    const ImageSample on_grid = image.size() == ref ? image : resample_to(image, ref);
    return model.encode(as_batch(on_grid.pixels), model.config().highest_train_res).mu;
  }
  return model.encode(image).mu;
}

Tensor encode_all(const Autoencoder& model, const std::vector<ImageSample>& images) {
  require(!images.empty(), "encode_all: no images");
  std::vector<double> data;
  Shape one;
  for (const auto& img : images) {
    const Tensor mu = encode_for_downstream(model, img);
    one = mu.shape();
    data.insert(data.end(), mu.data().begin(), mu.data().end());
  }
  return Tensor::from({images.size(), one[1], one[2], one[3]}, std::move(data));
}

LatentClassifier train_latent_classifier_on(const Tensor& latents, std::span<const int> labels,
                                            const ClassifierConfig& config) {
  require(latents.ndim() == 4 && latents.dim(0) == labels.size(), "classifier: one label per latent required");
  require(config.steps >= 1 && config.batch_size >= 1, "classifier: steps and batch_size must be >= 1");
  LatentClassifier clf(latents.dim(1), config.hidden, derive_seed(config.seed, 11));
  auto params = clf.parameters();
  auto state = make_optimizer_state(params, AdamOptions{config.lr, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(config.seed, 12));
  const std::size_t n = latents.dim(0), per = latents.numel() / n;
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  const auto src = latents.data();
  for (int step = 0; step < config.steps; ++step) {
    std::vector<double> batch;
    std::vector<int> lab;
    batch.reserve(bs * per);
    for (std::size_t b = 0; b < bs; ++b) {
      const std::size_t i = rng.index(n);
      batch.insert(batch.end(), src.begin() + i * per, src.begin() + (i + 1) * per);
      lab.push_back(labels[i]);
    }
    const Tensor x = Tensor::from({bs, latents.dim(1), latents.dim(2), latents.dim(3)}, std::move(batch));
    zero_grads(params);
    backward(ops::softmax_cross_entropy(clf.logits(x), lab));
    adam_step(params, state);
  }
  return clf;
}

namespace {

std::vector<int> labels_of(const std::vector<ImageSample>& set) {
  std::vector<int> l;
  for (const auto& s : set) l.push_back(s.label);
  return l;
}

}  // namespace

LatentClassifier train_latent_classifier(const Autoencoder& encoder, const std::vector<ImageSample>& train_set,
                                         const ClassifierConfig& config) {
  const auto labels = labels_of(train_set);
  return train_latent_classifier_on(encode_all(encoder, train_set), labels, config);
}

double evaluate_classifier(const LatentClassifier& classifier, const Autoencoder& encoder,
                           const std::vector<ImageSample>& test_set) {
  const auto labels = labels_of(test_set);
  return auroc(classifier.scores(encode_all(encoder, test_set)), labels);
}

std::string ClassifierGrid::csv() const {
  io::CsvWriter w({"test", "train_hr", "train_lr", "train_mixed"});
  const char* rows[2] = {"hr", "lr"};
  for (int t = 0; t < 2; ++t)
    w.row({rows[t], io::format_double(auroc[t][0]), io::format_double(auroc[t][1]), io::format_double(auroc[t][2])});
  return w.text();
}

double ClassifierGrid::cross_resolution_drop() const {
  return 0.5 * ((auroc[0][0] - auroc[1][0]) + (auroc[1][1] - auroc[0][1]));
}

ClassifierGrid run_classifier_grid(const Autoencoder& encoder, const std::vector<ImageSample>& train_hr,
                                   const std::vector<ImageSample>& test_hr, double lr_factor,
                                   const ClassifierConfig& config) {
  std::vector<ImageSample> train_lr, train_mixed, test_lr;
  for (std::size_t i = 0; i < train_hr.size(); ++i) {
    train_lr.push_back(degrade(train_hr[i], lr_factor));
    train_mixed.push_back(i % 2 == 0 ? train_hr[i] : train_lr.back());
  }
  for (const auto& s : test_hr) test_lr.push_back(degrade(s, lr_factor));

  const Tensor lat_test[2] = {encode_all(encoder, test_hr), encode_all(encoder, test_lr)};
  const auto test_labels = labels_of(test_hr);
  const std::vector<ImageSample>* train_sets[3] = {&train_hr, &train_lr, &train_mixed};
  ClassifierGrid grid;
  for (int tr = 0; tr < 3; ++tr) {
    const auto labels = labels_of(*train_sets[tr]);
    ClassifierConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(tr));
    const LatentClassifier clf = train_latent_classifier_on(encode_all(encoder, *train_sets[tr]), labels, cfg);
    for (int te = 0; te < 2; ++te) grid.auroc[te][tr] = auroc(clf.scores(lat_test[te]), test_labels);
  }
  return grid;
}

}  // namespace resinv
