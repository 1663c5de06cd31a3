#pragma once

// Run-level helpers shared by the command-line tool and the acceptance
// harness: corpus and gamma-table construction from a RunConfig, training
// with CSV/checkpoint output, and checkpoint loading.

#include <filesystem>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "resinv/config.hpp"
#include "resinv/losses.hpp"
#include "resinv/metrics.hpp"
#include "resinv/model.hpp"

namespace resinv {

/// Training corpus described by config.data and config.n_train.
std::vector<ImageSample> training_corpus(const RunConfig& config);

/// Held-out images from the same generator with a derived seed; `stream`
/// separates independent held-out sets (evaluation, classifier train/test).
std::vector<ImageSample> heldout_corpus(const RunConfig& config, int n, std::uint64_t stream);

/// Gamma table from the first config.gamma.samples images of `corpus`.
GammaTable gamma_table_for(const RunConfig& config, const std::vector<ImageSample>& corpus);

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const RunConfig& config);

struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<Autoencoder> model;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

struct TrainingOutcome {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // one per step, csv_values() order
  GammaTable table;

  /// Mean of column `name` over steps [begin, end).
  double window_mean(const std::string& name, std::size_t begin, std::size_t end) const;
};

using ProgressFn = std::function<void(int step, const LossReport& report)>;

/// Trains `model` for config.train.steps on `corpus`. When `out_dir` is not
/// empty, writes config.json, gamma.csv, losses.csv and checkpoint.rtf
/// (plus checkpoint_<step>.rtf every checkpoint_every steps).
TrainingOutcome run_training(const RunConfig& config, Autoencoder& model, const std::vector<ImageSample>& corpus,
                             const std::filesystem::path& out_dir, const ProgressFn& progress = {});

}  // namespace resinv
