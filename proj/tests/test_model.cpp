#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "resinv/errors.hpp"
#include "resinv/model.hpp"
#include "resinv/ops.hpp"
#include "test_support.hpp"

using namespace resinv;
using resinv::testing::random_tensor;

namespace {

ModelConfig small_config(Size2 grid = {16, 16}, int channels = 8) {
  ModelConfig c;
  c.base_channels = channels;
  c.latent_grid = grid;
  return c;
}

Tensor image(Size2 s, std::uint64_t seed) {
  Rng rng(seed);
  return testing::uniform_tensor({1, 1, static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)}, rng, 0.0, 1.0);
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("config derives latent resolution and reference size") {
  const ModelConfig c = small_config();
  CHECK(c.latent_res() == Spacing{8, 8});
  CHECK(c.reference_size() == Size2{128, 128});
  CHECK(c.encoder_channels() == std::vector<std::size_t>{8, 16, 32});
  ModelConfig bad = c;
  bad.n_layers = 0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("encode: 64 px at 2 mm and 128 px at 1 mm share the 16x16 latent grid") {
  const Autoencoder ae(small_config(), 1);
  const auto a = ae.encode(image({64, 64}, 1), {2, 2});
  const auto b = ae.encode(image({128, 128}, 2), {1, 1});
  CHECK(a.mu.shape() == Shape{1, 4, 16, 16});
  CHECK(b.mu.shape() == Shape{1, 4, 16, 16});
  CHECK(a.logvar.shape() == a.mu.shape());
}

TEST_CASE("encode: input already at latent resolution keeps its grid through every layer") {
  const Autoencoder ae(small_config(), 1);
  const auto plan = ae.encode_plan({16, 16}, {8, 8});
  for (const auto& s : plan.layer_sizes) CHECK(s == Size2{16, 16});
  CHECK(ae.encode(image({16, 16}, 3), {8, 8}).grid() == Size2{16, 16});
}

TEST_CASE("encode: deterministic for a fixed seed") {
  const Autoencoder a(small_config(), 5), b(small_config(), 5);
  const Tensor x = image({32, 32}, 4);
  const auto d1 = a.encode(x, {4, 4}), d2 = b.encode(x, {4, 4});
  CHECK(values(d1.mu) == values(d2.mu));
  CHECK(values(d1.logvar) == values(d2.logvar));
}

TEST_CASE("encode: finer than reference is rejected") {
  const Autoencoder ae(small_config(), 1);
  CHECK_THROWS_WITH_AS(ae.encode(image({128, 128}, 1), {0.5, 0.5}), doctest::Contains("finer than reference"),
                       ContractViolation);
  CHECK_THROWS_AS(ae.encode(Tensor::zeros({1, 2, 16, 16}), {8, 8}), ContractViolation);
}

TEST_CASE("decode: exact sizes for any target") {
  const Autoencoder ae(small_config(), 1);
  Rng rng(9);
  const Tensor z = random_tensor({1, 4, 16, 16}, rng);
  CHECK(ae.decode(z, {64, 64}, {2, 2}).shape() == Shape{1, 1, 64, 64});
  CHECK(ae.decode(z, {128, 128}, {1, 1}).shape() == Shape{1, 1, 128, 128});
  CHECK(ae.decode(z, {37, 53}, {128.0 / 37, 128.0 / 53}).shape() == Shape{1, 1, 37, 53});
  const auto plan = ae.decode_plan({16, 16}, {8, 8});
  for (const auto& s : plan.layer_sizes) CHECK(s == Size2{16, 16});
  CHECK_THROWS_AS(ae.decode(random_tensor({1, 4, 8, 8}, rng), {64, 64}, {2, 2}), ContractViolation);
  CHECK_THROWS_AS(ae.decode(z, {0, 64}, {2, 2}), ContractViolation);
}

TEST_CASE("parameter names are unique and count is resolution-independent") {
  const Autoencoder ae(small_config(), 1);
  std::set<std::string> names;
  std::size_t total = 0;
  for (const auto& [name, t] : ae.named_parameters()) {
    names.insert(name);
    total += t.numel();
  }
  CHECK(names.size() == ae.named_parameters().size());
  CHECK(total == ae.parameter_count());
  CHECK(names.count("enc.layer0.res.conv1.w") == 1);
  // Encoding at several sizes never creates parameters.
  (void)ae.encode(image({32, 32}, 1), {4, 4});
  (void)ae.encode(image({100, 100}, 1), {1.28, 1.28});
  CHECK(ae.parameter_count() == total);
  CHECK(ae.encoder_parameters().size() < ae.parameters().size());
}

TEST_CASE("load_parameters round-trips and rejects mismatches") {
  const Autoencoder a(small_config(), 1);
  Autoencoder b(small_config(), 2);
  b.load_parameters(a.named_parameters());
  const Tensor x = image({32, 32}, 7);
  CHECK(values(a.encode(x, {4, 4}).mu) == values(b.encode(x, {4, 4}).mu));
  NamedTensors missing = a.named_parameters();
  missing.pop_back();
  CHECK_THROWS_AS(b.load_parameters(missing), ContractViolation);
  NamedTensors wrong = a.named_parameters();
  wrong[0].second = Tensor::zeros({1});
  CHECK_THROWS_AS(b.load_parameters(wrong), ContractViolation);
}

TEST_CASE("reparameterize: zero variance returns mu") {
  Rng rng(1);
  LatentDistribution d{random_tensor({1, 4, 3, 3}, rng), Tensor::full({1, 4, 3, 3}, -60.0)};
  const auto code = reparameterize(d, rng);
  CHECK(testing::max_abs_diff(code.z.data(), d.mu.data()) < 1e-12);
}

TEST_CASE("reparameterize: prior draws are standard normal") {
  Rng rng(2024);
  LatentDistribution d{Tensor::zeros({1, 1, 100, 100}), Tensor::zeros({1, 1, 100, 100})};
  const auto z = reparameterize(d, rng).z.data();
  double m = 0.0, s = 0.0;
  for (double v : z) m += v;
  m /= static_cast<double>(z.size());
  for (double v : z) s += (v - m) * (v - m);
  s /= static_cast<double>(z.size() - 1);
  CHECK(std::fabs(m) < 0.05);
  CHECK(s >= 0.9);
  CHECK(s <= 1.1);
}

TEST_CASE("reparameterize: fixed seed gives identical draws") {
  LatentDistribution d{Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 2, 4, 4})};
  Rng a(5), b(5);
  CHECK(values(reparameterize(d, a).z) == values(reparameterize(d, b).z));
}

TEST_CASE("end-to-end gradcheck on an 8x8 toy") {
  ModelConfig c;
  c.n_layers = 1;
  c.base_channels = 2;
  c.latent_channels = 1;
  c.latent_grid = {4, 4};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Autoencoder ae(c, seed);
    Rng rng(seed + 100);
    // Non-zero residual paths so every parameter is exercised.
    std::vector<Tensor> params = ae.parameters();
    for (Tensor& p : params) {
      auto d = p.mutable_data();
      for (double& v : d) v += 0.1 * rng.normal();
    }
    Tensor x = testing::uniform_tensor({1, 1, 8, 8}, rng, 0.0, 1.0, true);
    const Tensor eps = random_tensor({1, 1, 4, 4}, rng);
    const Tensor w = random_tensor({1, 1, 6, 6}, rng);
    auto loss = [&] {
      const auto dist = ae.encode(x, {1, 1});
      const auto code = reparameterize_with(dist, eps);
      return ops::mean(ops::mul(ae.decode(code, {6, 6}, {8.0 / 6, 8.0 / 6}), w));
    };
    std::vector<Tensor> leaves = params;
    leaves.push_back(x);
    const auto r = testing::gradcheck(loss, leaves);
    CAPTURE(seed);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("fixed-factor mode only takes images that halve onto the grid") {
  ModelConfig c = small_config({8, 8});
  c.resize_mode = ResizeMode::fixed_factor;
  const Autoencoder ae(c, 1);
  CHECK(ae.encode(image({64, 64}, 1), {1, 1}).grid() == Size2{8, 8});
  CHECK_THROWS_AS(ae.encode(image({32, 32}, 1), {2, 2}), ContractViolation);
}
