#pragma once

// Training loop for the two-resolution objective, super-resolution
// evaluation, and the frozen-encoder latent classifier protocol.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resinv/image.hpp"
#include "resinv/losses.hpp"
#include "resinv/metrics.hpp"
#include "resinv/model.hpp"
#include "resinv/optim.hpp"
#include "resinv/rng.hpp"

namespace resinv {

struct TrainConfig {
  int steps = 500;
  int batch_size = 8;
  std::uint64_t seed = 1;
  double lr = 1e-3;
  LossWeights weights;
  /// Per-batch isotropic degradation factor ~ U(min, max).
  double lr_factor_min = 1.0;
  double lr_factor_max = 4.0;
  bool gamma_in_training = true;
  /// 0 disables periodic checkpoints.
  int checkpoint_every = 0;

  void validate() const;
};

/// One optimisation step on a batch at the reference resolution.
/// Variable-resize models train all three branches plus latent consistency;
/// fixed-factor models train the HR branch only (plain KL autoencoder).
LossReport train_step(const std::vector<ImageSample>& batch, Autoencoder& model, const GammaTable& table,
                      const TrainConfig& config, Rng& rng, OptimizerState& state);

class Trainer {
 public:
  Trainer(Autoencoder& model, const std::vector<ImageSample>& corpus, GammaTable table, TrainConfig config);

  /// Runs one step on the next batch (epoch-wise shuffled order).
  LossReport step();
  int steps_done() const { return steps_done_; }
  const GammaTable& gamma_table() const { return table_; }

 private:
  std::vector<ImageSample> next_batch();

  Autoencoder& model_;
  const std::vector<ImageSample>& corpus_;
  GammaTable table_;
  TrainConfig config_;
  Rng rng_;
  Rng order_rng_;
  OptimizerState state_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  int steps_done_ = 0;
};

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> average_ranks(std::span<const double> v);

struct SuperresRow {
  double factor = 1.0;
  std::optional<double> psnr;           // MC mean vs ground truth, pooled MSE
  double ssim = 0.0;                    // mean over images
  double mean_std = 0.0;                // mean of std_map over pixels and images
  std::optional<double> baseline_psnr;  // bilinear up of the degraded input
  std::vector<double> per_image_std;
};

std::vector<SuperresRow> evaluate_superres(const Autoencoder& model, const GammaTable& table,
                                           const std::vector<ImageSample>& test_set, std::span<const double> factors,
                                           int n_draws, std::uint64_t seed, double dynamic_range = 1.0);

/// Probability that a random positive outscores a random negative, ties 1/2.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct ClassifierConfig {
  int steps = 2000;
  int batch_size = 32;
  double lr = 3e-3;
  int hidden = 16;
  std::uint64_t seed = 1;
};

/// conv3x3 -> SiLU -> conv3x3 -> SiLU -> global average pool -> linear(2).
class LatentClassifier {
 public:
  LatentClassifier(std::size_t latent_channels, int hidden, std::uint64_t seed);

  Tensor logits(const Tensor& latents) const;
  /// Probability of class 1 for each latent in an [N,C,h,w] batch.
  std::vector<double> scores(const Tensor& latents) const;
  std::vector<Tensor> parameters() const;

 private:
  Tensor c1_w_, c1_b_, c2_w_, c2_b_, fc_w_, fc_b_;
};

/// Latent mean used for downstream tasks. Fixed-factor models first resample
/// the image onto the reference grid (the usual resample-then-encode route).
Tensor encode_for_downstream(const Autoencoder& model, const ImageSample& image);

/// [N, C, h, w] latents of every image, computed without recording.
Tensor encode_all(const Autoencoder& model, const std::vector<ImageSample>& images);

LatentClassifier train_latent_classifier(const Autoencoder& encoder, const std::vector<ImageSample>& train_set,
                                         const ClassifierConfig& config);
LatentClassifier train_latent_classifier_on(const Tensor& latents, std::span<const int> labels,
                                            const ClassifierConfig& config);
double evaluate_classifier(const LatentClassifier& classifier, const Autoencoder& encoder,
                           const std::vector<ImageSample>& test_set);

/// AUROC cells indexed [test][train] with test in {HR, LR} and train in
/// {HR, LR, mixed}.
struct ClassifierGrid {
  double auroc[2][3] = {};
  std::string csv() const;
  /// Mean of the two matched-resolution minus mismatched-resolution gaps.
  double cross_resolution_drop() const;
};

ClassifierGrid run_classifier_grid(const Autoencoder& encoder, const std::vector<ImageSample>& train_hr,
                                   const std::vector<ImageSample>& test_hr, double lr_factor,
                                   const ClassifierConfig& config);

}  // namespace resinv
