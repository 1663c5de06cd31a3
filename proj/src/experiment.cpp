#include "resinv/experiment.hpp"

#include <algorithm>

#include "resinv/data.hpp"
#include "resinv/errors.hpp"
#include "resinv/io.hpp"
#include "resinv/ops.hpp"
#include "resinv/pipeline.hpp"

namespace resinv {

std::vector<ImageSample> training_corpus(const RunConfig& config) {
  require(config.data.resolution == config.model.highest_train_res,
          "training corpus resolution " + config.data.resolution.str() + " must equal model.highest_train_res " +
              config.model.highest_train_res.str());
  return generate_synthetic(config.data, config.n_train);
}

std::vector<ImageSample> heldout_corpus(const RunConfig& config, int n, std::uint64_t stream) {
  SyntheticDataset d = config.data;
  d.seed = derive_seed(config.data.seed, 0x4e1d0000ULL + stream);
  return generate_synthetic(d, n);
}

GammaTable gamma_table_for(const RunConfig& config, const std::vector<ImageSample>& corpus) {
  require(!corpus.empty(), "gamma table: empty corpus");
  const std::size_t n = std::min(corpus.size(), static_cast<std::size_t>(config.gamma.samples));
  const std::vector<ImageSample> subset(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(n));
  return estimate_gamma_table(subset, config.gamma.factors, ops::interp_resize);
}

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const RunConfig& config) {
  io::write_rtf(path, {model.named_parameters(), run_config_json(config)});
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  io::RtfFile file = io::read_rtf(path);
  if (!file.header) throw FormatError("checkpoint " + path.string() + " has no config header");
  LoadedCheckpoint out;
  out.config = parse_run_config(*file.header);
  out.model = std::make_unique<Autoencoder>(out.config.model, 0);
  out.model->load_parameters(file.tensors);
  return out;
}

double TrainingOutcome::window_mean(const std::string& name, std::size_t begin, std::size_t end) const {
  const auto it = std::find(header.begin(), header.end(), name);
  require(it != header.end(), "training outcome has no column " + name);
  require(begin < end && end <= rows.size(), "training outcome: window out of range");
  const std::size_t col = static_cast<std::size_t>(it - header.begin());
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += rows[i][col];
  return s / static_cast<double>(end - begin);
}

TrainingOutcome run_training(const RunConfig& config, Autoencoder& model, const std::vector<ImageSample>& corpus,
                             const std::filesystem::path& out_dir, const ProgressFn& progress) {
  config.validate();
  TrainingOutcome out;
  // The fixed-factor baseline trains without the LR branch, so it needs no table.
  if (config.model.resize_mode == ResizeMode::variable) out.table = gamma_table_for(config, corpus);
  out.table.reference_res = config.model.highest_train_res;

  const bool write = !out_dir.empty();
  if (write) {
    io::write_text(out_dir / "config.json", run_config_json(config));
    if (!out.table.entries.empty()) io::write_text(out_dir / "gamma.csv", io::gamma_table_csv(out.table));
  }

  Trainer trainer(model, corpus, out.table, config.train);
  std::unique_ptr<io::CsvWriter> csv;
  for (int s = 0; s < config.train.steps; ++s) {
    const LossReport r = trainer.step();
    if (out.header.empty()) {
      out.header = r.csv_header();
      std::vector<std::string> h{"step"};
      h.insert(h.end(), out.header.begin(), out.header.end());
      csv = std::make_unique<io::CsvWriter>(h);
    }
    std::vector<double> row = r.csv_values();
    out.rows.push_back(row);
    row.insert(row.begin(), static_cast<double>(s + 1));
    csv->row(row);
    if (progress) progress(s + 1, r);
    if (write && config.train.checkpoint_every > 0 && (s + 1) % config.train.checkpoint_every == 0)
      save_checkpoint(out_dir / ("checkpoint_" + std::to_string(s + 1) + ".rtf"), model, config);
  }
  if (write) {
    csv->save(out_dir / "losses.csv");
    save_checkpoint(out_dir / "checkpoint.rtf", model, config);
  }
  return out;
}

}  // namespace resinv
