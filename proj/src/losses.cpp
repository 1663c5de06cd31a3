#include "resinv/losses.hpp"

#include <cmath>

#include "resinv/errors.hpp"
#include "resinv/metrics.hpp"
#include "resinv/ops.hpp"

namespace resinv {

void LossWeights::validate() const {
  for (double w : {w_rec_l1, w_perc, w_kl, w_latent, w_adv})
    require(std::isfinite(w) && w >= 0.0, "loss weights must be finite and non-negative");
  require(w_adv == 0.0, "adversarial loss is not implemented; w_adv must be 0");
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "l1_loss: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  return ops::mean(ops::abs(ops::sub(a, b)));
}

Tensor kl_loss(const LatentDistribution& d) {
  require(d.mu.shape() == d.logvar.shape(), "kl_loss: mu/logvar shape mismatch");
  Tensor inner = ops::sub(ops::sub(ops::add_scalar(d.logvar, 1.0), ops::square(d.mu)), ops::exp(d.logvar));
  return ops::scalar_mul(ops::mean(inner), -0.5);
}

Tensor latent_consistency_loss(const LatentDistribution& hr, const LatentDistribution& lr) {
  if (hr.mu.shape() != lr.mu.shape())
    contract_fail("latent consistency: latent shapes differ (" + shape_str(hr.mu.shape()) + " vs " +
                  shape_str(lr.mu.shape()) + "); the fixed latent grid invariant is broken");
  return l1_loss(hr.mu, lr.mu);
}

Tensor ssim_loss(const Tensor& a, const Tensor& b, double dynamic_range) {
  return ops::scalar_mul(ops::add_scalar(ssim_tensor(a, b, dynamic_range), -1.0), -1.0);
}

double LossReport::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  contract_fail("loss report has no term " + name);
}

std::vector<std::string> LossReport::csv_header() const {
  std::vector<std::string> h;
  for (const auto& t : terms) h.push_back(t.name);
  h.emplace_back("total");
  return h;
}

std::vector<double> LossReport::csv_values() const {
  std::vector<double> v;
  for (const auto& t : terms) v.push_back(t.value);
  v.push_back(total);
  return v;
}

LossReport total_training_loss(const TrainingBranches& b, const LossWeights& w, double dynamic_range) {
  w.validate();
  for (const Tensor* t : {&b.x_hr, &b.x_lr, &b.hr_from_hr, &b.lr_from_lr, &b.hr_from_lr})
    if (!t->defined()) contract_fail("total_training_loss: missing branch");
  if (!b.hr_latent.mu.defined() || !b.lr_latent.mu.defined())
    contract_fail("total_training_loss: missing latent distribution");

  std::vector<std::pair<LossTerm, Tensor>> parts;
  auto add = [&](const char* name, double weight, Tensor t) { parts.push_back({{name, t.item(), weight}, std::move(t)}); };
  add("l1_hr_hr", w.w_rec_l1, l1_loss(b.hr_from_hr, b.x_hr));
  add("perc_hr_hr", w.w_perc, ssim_loss(b.hr_from_hr, b.x_hr, dynamic_range));
  add("l1_lr_lr", w.w_rec_l1, l1_loss(b.lr_from_lr, b.x_lr));
  add("perc_lr_lr", w.w_perc, ssim_loss(b.lr_from_lr, b.x_lr, dynamic_range));
  add("l1_hr_lr", w.w_rec_l1, l1_loss(b.hr_from_lr, b.x_hr));
  add("perc_hr_lr", w.w_perc, ssim_loss(b.hr_from_lr, b.x_hr, dynamic_range));
  add("latent", w.w_latent, latent_consistency_loss(b.hr_latent, b.lr_latent));
  add("kl_hr", 0.5 * w.w_kl, kl_loss(b.hr_latent));
  add("kl_lr", 0.5 * w.w_kl, kl_loss(b.lr_latent));

  LossReport r;
  Tensor total;
  for (auto& [term, t] : parts) {
    r.terms.push_back(term);
    r.total += term.weight * term.value;
    Tensor scaled = ops::scalar_mul(t, term.weight);
    total = total.defined() ? ops::add(total, scaled) : scaled;
  }
  r.total_tensor = total;
  return r;
}

}  // namespace resinv
