#pragma once

#include <string>
#include <vector>

#include "resinv/model.hpp"
#include "resinv/tensor.hpp"

namespace resinv {

struct LossWeights {
  double w_rec_l1 = 1.0;
  double w_perc = 0.5;
  double w_kl = 1e-6;
  double w_latent = 0.5;
  /// Reserved for an adversarial term; only 0 is accepted.
  double w_adv = 0.0;

  void validate() const;
};

/// Mean absolute difference.
Tensor l1_loss(const Tensor& a, const Tensor& b);
/// Mean over elements of -0.5 (1 + logvar - mu^2 - exp(logvar)).
Tensor kl_loss(const LatentDistribution& dist);
/// L1 between the two means; both must sit on the same latent grid.
Tensor latent_consistency_loss(const LatentDistribution& hr, const LatentDistribution& lr);
/// 1 - SSIM, the perceptual stand-in.
Tensor ssim_loss(const Tensor& a, const Tensor& b, double dynamic_range = 1.0);

/// Everything one training step produces: two inputs, three decoded
/// branches and the two latent distributions.
struct TrainingBranches {
  Tensor x_hr, x_lr;
  Tensor hr_from_hr;  // HR latent decoded at HR
  Tensor lr_from_lr;  // LR latent decoded at LR
  Tensor hr_from_lr;  // LR latent decoded at HR
  LatentDistribution hr_latent, lr_latent;
};

struct LossTerm {
  std::string name;
  double value = 0.0;
  double weight = 0.0;
};

struct LossReport {
  std::vector<LossTerm> terms;
  double total = 0.0;
  Tensor total_tensor;  // differentiable, same value as `total`

  double term(const std::string& name) const;
  std::vector<std::string> csv_header() const;
  std::vector<double> csv_values() const;
};

/// Weighted sum, in order: per branch (hr_hr, lr_lr, hr_lr) l1 then perc,
/// then latent, then kl_hr and kl_lr each at w_kl / 2.
LossReport total_training_loss(const TrainingBranches& b, const LossWeights& w, double dynamic_range = 1.0);

}  // namespace resinv
