#pragma once

// Run configuration: one JSON document mirroring the model, training, loss,
// data, gamma-estimation, evaluation and classifier settings. Missing keys
// take defaults; unknown keys are rejected. configs/defaults.json holds the
// full reference document.

#include <string>
#include <vector>

#include "resinv/data.hpp"
#include "resinv/model.hpp"
#include "resinv/pipeline.hpp"

namespace resinv {

struct GammaConfig {
  std::vector<double> factors{1.0, 1.5, 2.0, 3.0, 4.0, 6.0};
  int samples = 20;
};

struct EvalConfig {
  std::vector<double> factors{1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6, 4.0};
  int draws = 40;
  int n_test = 20;
};

struct ClassifyConfig {
  ClassifierConfig classifier;
  double lr_factor = 2.0;
  int n_train = 800;
  int n_test = 200;
};

struct PathsConfig {
  std::string data_dir;
  std::string checkpoint;
  std::string gamma_table;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticDataset data;
  int n_train = 200;
  GammaConfig gamma;
  EvalConfig eval;
  ClassifyConfig classify;
  PathsConfig paths;

  void validate() const;
};

/// Throws ContractViolation for unknown keys, wrong types or invalid values.
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& config);

}  // namespace resinv
