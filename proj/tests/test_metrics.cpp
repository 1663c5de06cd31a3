#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "resinv/data.hpp"
#include "resinv/errors.hpp"
#include "resinv/metrics.hpp"
#include "resinv/ops.hpp"
#include "test_support.hpp"

using namespace resinv;
using resinv::testing::random_tensor;
using resinv::testing::uniform_tensor;

namespace {

Tensor planar(std::size_t h, std::size_t w, double (*f)(std::size_t)) {
  std::vector<double> v(h * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(i);
  return Tensor::from({h, w}, std::move(v));
}

GammaTable knots(std::vector<GammaEntry> e) {
  GammaTable t;
  t.entries = std::move(e);
  return t;
}

}  // namespace

TEST_CASE("ssim window is a normalised symmetric Gaussian") {
  const auto w = ssim_window();
  REQUIRE(w.size() == 11);
  double s = 0.0;
  for (double v : w) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t i = 0; i < 5; ++i) CHECK(w[i] == w[10 - i]);
  CHECK(w[5] / w[4] == doctest::Approx(std::exp(1.0 / (2 * 1.5 * 1.5))).epsilon(1e-13));
}

TEST_CASE("ssim: identity is exactly 1") {
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    const Tensor x = uniform_tensor({20, 17}, rng, 0.0, 1.0);
    CHECK(ssim(x, x, 1.0) == 1.0);
  }
}

TEST_CASE("ssim: constant images follow the closed form") {
  const Tensor a = Tensor::full({16, 16}, 0.5), b = Tensor::full({16, 16}, 0.6);
  // (2*0.5*0.6 + C1) / (0.5^2 + 0.6^2 + C1) with C1 = 1e-4, evaluated independently.
  CHECK(std::fabs(ssim(a, b, 1.0) - 0.9836092443861661) < 1e-10);
}

TEST_CASE("ssim: symmetric and bounded on random pairs") {
  Rng rng(50);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = uniform_tensor({16, 16}, rng, 0.0, 1.0), b = uniform_tensor({16, 16}, rng, 0.0, 1.0);
    const double ab = ssim(a, b, 1.0), ba = ssim(b, a, 1.0);
    CHECK(std::fabs(ab - ba) < 1e-12);
    CHECK(std::fabs(ab) <= 1.0);
  }
}

TEST_CASE("ssim: images smaller than the window are rejected") {
  CHECK_THROWS_AS(ssim(Tensor::zeros({8, 8}), Tensor::zeros({8, 8}), 1.0), ContractViolation);
  CHECK_THROWS_AS(ssim(Tensor::zeros({16, 16}), Tensor::zeros({16, 15}), 1.0), ContractViolation);
}

TEST_CASE("psnr: worked values") {
  const Tensor a = Tensor::full({4, 4}, 0.3), b = Tensor::full({4, 4}, 0.4);
  REQUIRE(psnr(a, b, 1.0).has_value());
  CHECK(*psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_FALSE(psnr(a, a, 1.0).has_value());
}

TEST_CASE("psnr: fixed pair against an independent evaluation") {
  const Tensor a = planar(16, 16, [](std::size_t i) { return 0.5 + 0.4 * std::sin(0.37 * static_cast<double>(i)); });
  const Tensor b = planar(16, 16, [](std::size_t i) { return 0.5 + 0.4 * std::cos(0.11 * static_cast<double>(i)); });
  CHECK(std::fabs(*psnr(a, b, 1.0) - 8.177114865128713) < 1e-10);
  CHECK(std::fabs(*psnr(a, b, 2.0) - 14.197714778408336) < 1e-10);
}

TEST_CASE("isotonic regression pools adjacent violators") {
  const auto pooled = isotonic_non_decreasing(std::vector<double>{0, 0.2, 0.1, 0.3});
  const std::vector<double> want{0, 0.15, 0.15, 0.3};
  CHECK(testing::max_abs_diff(pooled, want) < 1e-15);
  CHECK(isotonic_non_decreasing(std::vector<double>{3, 2, 1}) == std::vector<double>{2, 2, 2});
  CHECK(isotonic_non_decreasing(std::vector<double>{1, 2, 3}) == std::vector<double>{1, 2, 3});
  CHECK(isotonic_non_decreasing(std::vector<double>{}).empty());
}

TEST_CASE("gamma table: factor 1 is zero and constants lose nothing") {
  std::vector<ImageSample> constant;
  for (int i = 0; i < 3; ++i) constant.push_back({Tensor::full({32, 32}, 0.2 * i + 0.1), {1, 1}, 0});
  const std::vector<double> factors{1, 1.5, 2, 3, 4, 6};
  const auto t = estimate_gamma_table(constant, factors, ops::interp_resize);
  REQUIRE(t.entries.size() == 6);
  for (const auto& e : t.entries) CHECK(e.gamma == 0.0);
  CHECK(t.n_samples_used == 3);
  CHECK_THROWS_AS(estimate_gamma_table({}, factors, ops::interp_resize), ContractViolation);
  CHECK_THROWS_AS(estimate_gamma_table(constant, std::vector<double>{1.5, 2}, ops::interp_resize), ContractViolation);
}

TEST_CASE("gamma table: non-decreasing on the synthetic corpus with 20 samples") {
  SyntheticDataset cfg;
  const auto corpus = generate_synthetic(cfg, 20);
  const std::vector<double> factors{1, 1.5, 2, 3, 4, 6};
  const auto t = estimate_gamma_table(corpus, factors, ops::interp_resize);
  CHECK(t.entries.front().gamma == 0.0);
  for (std::size_t i = 0; i + 1 < t.entries.size(); ++i) CHECK(t.entries[i].gamma <= t.entries[i + 1].gamma);
  CHECK(t.entries.back().gamma > 0.05);
  CHECK(t.entries.back().gamma <= 1.0);
}

TEST_CASE("lookup_gamma: knots, midpoints, clamping, anisotropy") {
  const auto t = knots({{1, 0.0}, {2, 0.2}, {3, 0.4}, {6, 0.7}});
  CHECK(lookup_gamma(t, {1, 1}) == 0.0);
  CHECK(lookup_gamma(t, {2, 2}) == 0.2);
  CHECK(lookup_gamma(t, {2.5, 2.5}) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(lookup_gamma(t, {10, 10}) == 0.7);
  CHECK(lookup_gamma(t, {0.5, 0.5}) == 0.0);
  // Geometric mean of 1 and 4 is 2.
  CHECK(lookup_gamma(t, {1, 4}) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(lookup_gamma(GammaTable{}, {1, 1}), ContractViolation);
}

TEST_CASE("inject_noise: gamma 0 is bit identity, gamma 0.3 matches the formula") {
  Rng rng(1);
  const Tensor z = random_tensor({1, 4, 8, 8}, rng);
  Rng r0(2);
  const Tensor same = inject_noise(z, 0.0, r0);
  CHECK(std::equal(same.data().begin(), same.data().end(), z.data().begin()));

  Rng r1(9), r2(9);
  const Tensor noised = inject_noise(z, 0.3, r1);
  const auto eps = r2.normals(z.numel());
  for (std::size_t i = 0; i < z.numel(); ++i)
    CHECK(noised.data()[i] == doctest::Approx(0.7 * z.data()[i] + 0.3 * eps[i]).epsilon(1e-15));
  CHECK_THROWS_AS(inject_noise(z, 1.5, r1), ContractViolation);
  CHECK_THROWS_AS(inject_noise(z, -0.1, r1), ContractViolation);
}

TEST_CASE("inject_noise: gamma 1 is standard normal, variance interpolates") {
  Rng rng(77);
  const std::size_t n = 100000;
  auto moments = [](const Tensor& t) {
    double m = 0.0, v = 0.0;
    for (double x : t.data()) m += x;
    m /= static_cast<double>(t.numel());
    for (double x : t.data()) v += (x - m) * (x - m);
    return std::pair{m, v / static_cast<double>(t.numel() - 1)};
  };
  const Tensor z = Tensor::from({n}, rng.normals(n));
  const auto [m1, v1] = moments(inject_noise(z, 1.0, rng));
  CHECK(std::fabs(m1) < 0.05);
  CHECK(v1 >= 0.9);
  CHECK(v1 <= 1.1);
  const double vz = moments(z).second;
  for (double g : {0.25, 0.5, 0.75}) {
    const double want = ((1 - g) * (1 - g) + g * g) * vz;
    CHECK(std::fabs(moments(inject_noise(z, g, rng)).second / want - 1.0) < 0.05);
  }
}

TEST_CASE("summarize_draws: n-1 std and permutation invariance") {
  std::vector<Tensor> draws{Tensor::from({2}, {1, 0}), Tensor::from({2}, {3, 0}), Tensor::from({2}, {5, 0})};
  const auto r = summarize_draws(draws);
  CHECK(r.mean_image.data()[0] == 3.0);
  CHECK(r.std_map.data()[0] == 2.0);
  CHECK(r.std_map.data()[1] == 0.0);
  std::swap(draws[0], draws[2]);
  const auto p = summarize_draws(draws);
  CHECK(p.std_map.data()[0] == r.std_map.data()[0]);
  CHECK_THROWS_AS(summarize_draws({draws[0]}), ContractViolation);
}

TEST_CASE("mc_superresolve: no stochasticity gives a zero std map") {
  ModelConfig c;
  c.base_channels = 4;
  c.latent_grid = {4, 4};
  Autoencoder ae(c, 3);
  for (auto& [name, t] : ae.named_parameters()) {
    if (name == "enc.logvar.w")
      for (double& v : t.mutable_data()) v = 0.0;
    if (name == "enc.logvar.b")
      for (double& v : t.mutable_data()) v = -60.0;
  }
  Rng rng(4);
  const ImageSample img{uniform_tensor({16, 16}, rng, 0.0, 1.0), {2, 2}, 0};
  const auto r = mc_superresolve(img, ae, knots({{1, 0.0}, {6, 0.0}}), {32, 32}, {1, 1}, 5, 11);
  CHECK(r.n_draws == 5);
  CHECK(r.std_map.shape() == Shape{32, 32});
  for (double v : r.std_map.data()) CHECK(v < 1e-10);
}

TEST_CASE("mc_superresolve: deterministic per seed, noise grows the std map") {
  ModelConfig c;
  c.base_channels = 4;
  c.latent_grid = {4, 4};
  const Autoencoder ae(c, 3);
  Rng rng(5);
  const ImageSample img{uniform_tensor({16, 16}, rng, 0.0, 1.0), {2, 2}, 0};
  const auto quiet = knots({{1, 0.0}, {6, 0.0}});
  const auto loud = knots({{1, 0.0}, {2, 0.6}});
  const auto a = mc_superresolve(img, ae, quiet, {32, 32}, {1, 1}, 6, 21);
  const auto b = mc_superresolve(img, ae, quiet, {32, 32}, {1, 1}, 6, 21);
  CHECK(std::equal(a.std_map.data().begin(), a.std_map.data().end(), b.std_map.data().begin()));
  const auto c2 = mc_superresolve(img, ae, loud, {32, 32}, {1, 1}, 6, 21);
  CHECK(ops::mean(c2.std_map).item() > ops::mean(a.std_map).item());
  CHECK_THROWS_AS(mc_superresolve(img, ae, quiet, {32, 32}, {1, 1}, 1, 21), ContractViolation);
}
