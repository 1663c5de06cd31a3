#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "resinv/data.hpp"
#include "resinv/errors.hpp"
#include "resinv/ops.hpp"
#include "resinv/pipeline.hpp"

using namespace resinv;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.base_channels = 4;
  c.latent_grid = {6, 6};
  return c;
}

// 48 px keeps the smallest LR image (factor 4) above the 11 px SSIM window.
std::vector<ImageSample> tiny_corpus(int n) {
  SyntheticDataset d;
  d.size = {48, 48};
  return generate_synthetic(d, n);
}

GammaTable tiny_table() {
  GammaTable t;
  t.entries = {{1, 0.0}, {2, 0.1}, {4, 0.3}};
  return t;
}

double brute_force_auroc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST_CASE("auroc: separation, ties and a six-point case") {
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  const std::vector<double> s{0.9, 0.4, 0.7, 0.5, 0.1, 0.3};
  const std::vector<int> l{1, 1, 1, 0, 0, 0};
  CHECK(brute_force_auroc(s, l) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(auroc(s, l) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  const std::vector<double> tied{0.3, 0.3, 0.7, 0.3, 0.1, 0.7};
  CHECK(auroc(tied, l) == doctest::Approx(brute_force_auroc(tied, l)).epsilon(1e-15));
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ContractViolation);
}

TEST_CASE("spearman with ties") {
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(average_ranks(std::vector<double>{5, 1, 5, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{7, 7, 7}) == 0.0);
}

TEST_CASE("train_step: fixed seed gives bit-identical reports") {
  const auto corpus = tiny_corpus(4);
  auto run = [&] {
    Autoencoder m(tiny_model(), 3);
    TrainConfig cfg;
    cfg.batch_size = 2;
    Trainer t(m, corpus, tiny_table(), cfg);
    std::vector<double> out;
    for (int i = 0; i < 3; ++i) {
      const auto r = t.step();
      auto v = r.csv_values();
      out.insert(out.end(), v.begin(), v.end());
    }
    for (const auto& p : m.parameters()) out.insert(out.end(), p.data().begin(), p.data().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("train_step: degenerate factor range keeps the report well formed") {
  const auto corpus = tiny_corpus(2);
  Autoencoder m(tiny_model(), 3);
  TrainConfig cfg;
  cfg.lr_factor_min = cfg.lr_factor_max = 1.0;
  Rng rng(1);
  auto state = make_optimizer_state(m.parameters());
  const auto r = train_step(corpus, m, tiny_table(), cfg, rng, state);
  CHECK(r.terms.size() == 9);
  CHECK(std::isfinite(r.total));
  // Both encodings see the same image, so their means agree exactly.
  CHECK(r.term("latent") == 0.0);
  CHECK(r.term("l1_lr_lr") > 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("train_step: rejects batches off the reference grid") {
  auto corpus = tiny_corpus(2);
  corpus[1] = degrade(corpus[1], 2.0);
  Autoencoder m(tiny_model(), 3);
  Rng rng(1);
  auto state = make_optimizer_state(m.parameters());
  CHECK_THROWS_AS(train_step(corpus, m, tiny_table(), TrainConfig{}, rng, state), ContractViolation);
  TrainConfig bad;
  bad.lr_factor_min = 0.5;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("a few steps lower the loss on a fixed batch") {
  const auto corpus = tiny_corpus(2);
  Autoencoder m(tiny_model(), 5);
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.lr_factor_min = cfg.lr_factor_max = 2.0;
  Rng rng(2);
  auto state = make_optimizer_state(m.parameters(), AdamOptions{cfg.lr});
  const double first = train_step(corpus, m, tiny_table(), cfg, rng, state).total;
  double last = first;
  for (int i = 0; i < 15; ++i) last = train_step(corpus, m, tiny_table(), cfg, rng, state).total;
  CHECK(last < first);
}

TEST_CASE("fixed-factor baseline trains the HR branch only") {
  const auto corpus = tiny_corpus(2);
  ModelConfig c = tiny_model();
  c.resize_mode = ResizeMode::fixed_factor;
  Autoencoder m(c, 1);
  Rng rng(1);
  auto state = make_optimizer_state(m.parameters());
  const auto r = train_step(corpus, m, GammaTable{}, TrainConfig{}, rng, state);
  CHECK(r.terms.size() == 3);
  CHECK(r.csv_header() == std::vector<std::string>{"l1_hr_hr", "perc_hr_hr", "kl_hr", "total"});
}

TEST_CASE("evaluate_superres: row per factor, bilinear baseline on constants is exact") {
  ModelConfig c = tiny_model();
  const Autoencoder m(c, 1);
  std::vector<ImageSample> test{{Tensor::full({48, 48}, 0.4), {1, 1}, 0}, {Tensor::full({48, 48}, 0.6), {1, 1}, 1}};
  const std::vector<double> factors{1.0, 2.0};
  const auto rows = evaluate_superres(m, tiny_table(), test, factors, 3, 7);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].factor == 2.0);
  CHECK_FALSE(rows[0].baseline_psnr.has_value());
  CHECK_FALSE(rows[1].baseline_psnr.has_value());
  CHECK(rows[0].psnr.has_value());
  CHECK(rows[1].per_image_std.size() == 2);
  CHECK(rows[1].mean_std >= 0.0);
}

TEST_CASE("classifier: encoder stays frozen and the grid has six cells") {
  SyntheticDataset d;
  d.size = {48, 48};
  const auto train = generate_synthetic(d, 8);
  d.seed = 99;
  const auto test = generate_synthetic(d, 6);
  const Autoencoder m(tiny_model(), 4);
  std::vector<std::vector<double>> before;
  for (const auto& p : m.encoder_parameters()) before.emplace_back(p.data().begin(), p.data().end());
  ClassifierConfig cc;
  cc.steps = 5;
  cc.batch_size = 4;
  cc.hidden = 4;
  const auto grid = run_classifier_grid(m, train, test, 2.0, cc);
  std::size_t k = 0;
  for (const auto& p : m.encoder_parameters()) {
    CHECK(std::vector<double>(p.data().begin(), p.data().end()) == before[k]);
    CHECK_FALSE(p.has_grad());
    ++k;
  }
  for (int te = 0; te < 2; ++te)
    for (int tr = 0; tr < 3; ++tr) {
      CHECK(grid.auroc[te][tr] >= 0.0);
      CHECK(grid.auroc[te][tr] <= 1.0);
    }
  const std::string csv = grid.csv();
  CHECK(csv.rfind("test,train_hr,train_lr,train_mixed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("cross-resolution drop averages the two mismatched gaps") {
  ClassifierGrid g;
  g.auroc[0][0] = 0.95;
  g.auroc[1][0] = 0.75;
  g.auroc[1][1] = 0.9;
  g.auroc[0][1] = 0.8;
  CHECK(g.cross_resolution_drop() == doctest::Approx(0.15));
}

TEST_CASE("classifier learns a separable latent toy") {
  Rng rng(3);
  std::vector<double> v;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    const int l = i % 2;
    labels.push_back(l);
    for (int k = 0; k < 2 * 3 * 3; ++k) v.push_back(rng.normal() * 0.3 + (l ? 1.0 : -1.0));
  }
  const Tensor lat = Tensor::from({40, 2, 3, 3}, v);
  ClassifierConfig cc;
  cc.steps = 150;
  cc.batch_size = 16;
  cc.hidden = 4;
  cc.lr = 1e-2;
  const auto clf = train_latent_classifier_on(lat, labels, cc);
  CHECK(auroc(clf.scores(lat), labels) > 0.95);
}
