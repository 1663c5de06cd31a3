#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "resinv/config.hpp"
#include "resinv/errors.hpp"
#include "resinv/io.hpp"

using namespace resinv;

TEST_CASE("reference defaults file matches the built-in defaults") {
  const RunConfig parsed = parse_run_config(io::read_text(RESINV_DEFAULTS_JSON));
  CHECK(run_config_json(parsed) == run_config_json(RunConfig{}));
}

TEST_CASE("empty document takes every default") {
  const RunConfig c = parse_run_config("{}");
  CHECK(c.model.n_layers == 3);
  CHECK(c.model.base_channels == 32);
  CHECK(c.train.steps == 500);
  CHECK(c.train.lr_factor_min == 1.0);
  CHECK(c.train.lr_factor_max == 4.0);
  CHECK(c.train.weights.w_kl == 1e-6);
  CHECK(c.gamma.samples == 20);
  CHECK(c.eval.draws == 40);
  CHECK(c.classify.classifier.steps == 2000);
}

TEST_CASE("values override defaults and survive a round trip") {
  const RunConfig c = parse_run_config(R"({
    "model": {"base_channels": 8, "latent_grid": [4, 6], "resize_mode": "fixed_factor"},
    "train": {"steps": 12, "lr_factor_range": [1.5, 2.5], "gamma_in_training": false},
    "data": {"size": [32, 48], "n_train": 17},
    "paths": {"checkpoint": "x.rtf"}
  })");
  CHECK(c.model.base_channels == 8);
  CHECK(c.model.latent_grid == Size2{4, 6});
  CHECK(c.model.resize_mode == ResizeMode::fixed_factor);
  CHECK(c.train.steps == 12);
  CHECK(c.train.lr_factor_min == 1.5);
  CHECK_FALSE(c.train.gamma_in_training);
  CHECK(c.data.size == Size2{32, 48});
  CHECK(c.n_train == 17);
  CHECK(c.paths.checkpoint == "x.rtf");
  CHECK(run_config_json(parse_run_config(run_config_json(c))) == run_config_json(c));
}

TEST_CASE("unknown keys, wrong types and invalid values are rejected") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"modle": {}})"), doctest::Contains("unknown key"), ContractViolation);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"model": {"layers": 3}})"), doctest::Contains("config.model.layers"),
                       ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"steps": "many"}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"steps": 0}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"lr_factor_range": [0.5, 2]}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"loss": {"w_adv": 0.1}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"latent_res": [4, 4]}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"resize_mode": "magic"}})"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("{not json"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("[]"), ContractViolation);
}
