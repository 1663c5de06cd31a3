// resinv: command-line front end for the resolution-invariant autoencoder.
//
// Exit codes: 0 success, 1 contract violation (bad arguments to an
// operation, out-of-domain input), 2 format / I/O error or bad command line.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "resinv/config.hpp"
#include "resinv/data.hpp"
#include "resinv/errors.hpp"
#include "resinv/experiment.hpp"
#include "resinv/io.hpp"
#include "resinv/metrics.hpp"
#include "resinv/ops.hpp"
#include "resinv/pipeline.hpp"

namespace fs = std::filesystem;
using namespace resinv;

namespace {

constexpr int kExitContract = 1;
constexpr int kExitFormat = 2;

// Stream ids for held-out corpora.
constexpr std::uint64_t kEvalStream = 1;
constexpr std::uint64_t kClassifyTrainStream = 2;
constexpr std::uint64_t kClassifyTestStream = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON run configuration (missing keys take defaults)");
  sub->add_option("--seed", c.seed, "Overrides data, training and classifier seeds");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : parse_run_config(io::read_text(c.config_path));
  if (c.seed) {
    cfg.data.seed = *c.seed;
    cfg.train.seed = *c.seed;
    cfg.classify.classifier.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

void write_config(const Common& c, const RunConfig& cfg) {
  io::write_text(fs::path(c.out) / "config.json", run_config_json(cfg));
}

Spacing spacing_arg(const std::vector<double>& v, const char* flag) {
  if (v.size() != 2) contract_fail(std::string(flag) + " expects two comma-separated values y,x");
  return {v[0], v[1]};
}

Size2 size_arg(const std::vector<int>& v, const char* flag) {
  if (v.size() != 2) contract_fail(std::string(flag) + " expects two comma-separated values h,w");
  return {v[0], v[1]};
}

io::DynamicRange range_arg(const std::vector<double>& v) {
  if (v.size() != 2) contract_fail("--range expects lo,hi");
  return {v[0], v[1]};
}

std::string checkpoint_path(const std::string& flag, const RunConfig& cfg) {
  const std::string p = flag.empty() ? cfg.paths.checkpoint : flag;
  if (p.empty()) contract_fail("no checkpoint given (--checkpoint or paths.checkpoint)");
  return p;
}

// Settings a command takes from the checkpoint: the architecture always
// comes from the checkpoint; everything else from the resolved config.
RunConfig merge_checkpoint(RunConfig cfg, const LoadedCheckpoint& ck) {
  cfg.model = ck.config.model;
  return cfg;
}

GammaTable load_or_estimate_table(const std::string& flag, const RunConfig& cfg) {
  const std::string p = flag.empty() ? cfg.paths.gamma_table : flag;
  if (!p.empty()) return io::parse_gamma_table(io::read_text(p), cfg.model.highest_train_res);
  return gamma_table_for(cfg, training_corpus(cfg));
}

std::string opt_str(const std::optional<double>& v) { return v ? io::format_double(*v) : "inf"; }

std::string pad4(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

double max_of(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, v);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resolution-invariant variational autoencoder tools"};
  app.require_subcommand(1);

  // gen-data
  Common gd;
  int gd_n = 0;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic corpus as PGM images plus an RTF bundle");
  add_common(gen, gd);
  gen->add_option("--n", gd_n, "Number of images (default data.n_train)");

  // estimate-gamma
  Common eg;
  std::vector<double> eg_factors;
  int eg_samples = 0;
  auto* est = app.add_subcommand("estimate-gamma", "Estimate the SSIM-drop gamma table");
  add_common(est, eg);
  est->add_option("--factors", eg_factors, "Degradation factors, must include 1")->delimiter(',');
  est->add_option("--samples", eg_samples, "Number of corpus images averaged");

  // train
  Common tr;
  int tr_steps = 0;
  auto* train = app.add_subcommand("train", "Train an autoencoder on the synthetic corpus");
  add_common(train, tr);
  train->add_option("--steps", tr_steps, "Override train.steps");

  // encode
  Common en;
  std::string en_ck, en_input;
  std::vector<double> en_res, en_range{0.0, 1.0};
  auto* enc = app.add_subcommand("encode", "Encode a PGM image to its latent distribution");
  add_common(enc, en);
  enc->add_option("--checkpoint", en_ck, "Model checkpoint (.rtf)");
  enc->add_option("--input", en_input, "Input PGM")->required();
  enc->add_option("--input-res", en_res, "Pixel spacing y,x in mm")->delimiter(',')->required();
  enc->add_option("--range", en_range, "PGM dynamic range lo,hi")->delimiter(',');

  // decode
  Common de;
  std::string de_ck, de_latent;
  std::vector<int> de_size;
  std::vector<double> de_res, de_range{0.0, 1.0};
  bool de_sample = false;
  auto* dec = app.add_subcommand("decode", "Decode a latent file to any target grid");
  add_common(dec, de);
  dec->add_option("--checkpoint", de_ck, "Model checkpoint (.rtf)");
  dec->add_option("--latent", de_latent, "Latent file written by encode")->required();
  dec->add_option("--target-size", de_size, "Output size h,w")->delimiter(',')->required();
  dec->add_option("--target-res", de_res, "Output spacing y,x in mm")->delimiter(',')->required();
  dec->add_option("--range", de_range, "PGM dynamic range lo,hi")->delimiter(',');
  dec->add_flag("--sample", de_sample, "Decode a reparameterised draw instead of the mean");

  // superres
  Common sr;
  std::string sr_ck, sr_input, sr_table;
  std::vector<double> sr_in_res, sr_target_res, sr_range{0.0, 1.0};
  std::vector<int> sr_size;
  int sr_draws = 0;
  auto* sup = app.add_subcommand("superres", "Monte Carlo super-resolution with an uncertainty map");
  add_common(sup, sr);
  sup->add_option("--checkpoint", sr_ck, "Model checkpoint (.rtf)");
  sup->add_option("--gamma-table", sr_table, "gamma.csv (default: paths.gamma_table, else re-estimated)");
  sup->add_option("--input", sr_input, "Input PGM")->required();
  sup->add_option("--input-res", sr_in_res, "Input spacing y,x in mm")->delimiter(',')->required();
  sup->add_option("--target-res", sr_target_res, "Output spacing y,x in mm")->delimiter(',')->required();
  sup->add_option("--target-size", sr_size, "Output size h,w (default keeps the field of view)")->delimiter(',');
  sup->add_option("--draws", sr_draws, "Number of draws (default eval.draws)");
  sup->add_option("--range", sr_range, "PGM dynamic range lo,hi")->delimiter(',');

  // eval-superres
  Common ev;
  std::string ev_ck, ev_table;
  auto* evs = app.add_subcommand("eval-superres", "Per-factor PSNR/SSIM/uncertainty on held-out images");
  add_common(evs, ev);
  evs->add_option("--checkpoint", ev_ck, "Model checkpoint (.rtf)");
  evs->add_option("--gamma-table", ev_table, "gamma.csv (default: paths.gamma_table, else re-estimated)");

  // classify
  Common cl;
  std::string cl_ck, cl_base;
  auto* cls = app.add_subcommand("classify", "Frozen-encoder latent classifier grid (HR/LR/mixed)");
  add_common(cls, cl);
  cls->add_option("--checkpoint", cl_ck, "Encoder checkpoint (.rtf)");
  cls->add_option("--baseline-checkpoint", cl_base, "Optional second encoder for comparison");

  // metrics
  Common me;
  std::string me_a, me_b;
  std::vector<double> me_range{0.0, 1.0};
  auto* met = app.add_subcommand("metrics", "SSIM and PSNR between two PGM images");
  add_common(met, me);
  met->add_option("--a", me_a, "First PGM")->required();
  met->add_option("--b", me_b, "Second PGM")->required();
  met->add_option("--range", me_range, "PGM dynamic range lo,hi")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitFormat;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = resolve(gd);
      const int n = gd_n > 0 ? gd_n : cfg.n_train;
      const fs::path out(gd.out);
      const auto corpus = generate_synthetic(cfg.data, n);
      io::CsvWriter index({"file", "label", "res_y", "res_x"});
      io::RtfFile bundle;
      for (int i = 0; i < n; ++i) {
        const auto& s = corpus[static_cast<std::size_t>(i)];
        const std::string name = "img_" + pad4(i);
        io::write_pgm(out / (name + ".pgm"), s.pixels, {0.0, 1.0});
        index.row({name + ".pgm", std::to_string(s.label), io::format_double(s.resolution.y),
                   io::format_double(s.resolution.x)});
        bundle.tensors.emplace_back(name, s.pixels);
      }
      index.save(out / "index.csv");
      io::write_rtf(out / "corpus.rtf", bundle);
      write_config(gd, cfg);
    } else if (est->parsed()) {
      RunConfig cfg = resolve(eg);
      if (!eg_factors.empty()) cfg.gamma.factors = eg_factors;
      if (eg_samples > 0) cfg.gamma.samples = eg_samples;
      cfg.validate();
      RunConfig data_cfg = cfg;
      data_cfg.n_train = std::max(cfg.n_train, cfg.gamma.samples);
      const GammaTable t = gamma_table_for(cfg, training_corpus(data_cfg));
      io::write_text(fs::path(eg.out) / "gamma.csv", io::gamma_table_csv(t));
      write_config(eg, cfg);
    } else if (train->parsed()) {
      RunConfig cfg = resolve(tr);
      if (tr_steps > 0) cfg.train.steps = tr_steps;
      cfg.validate();
      Autoencoder model(cfg.model, derive_seed(cfg.train.seed, 0));
      const auto corpus = training_corpus(cfg);
      run_training(cfg, model, corpus, tr.out, [&](int step, const LossReport& r) {
        if (step % 50 == 0 || step == cfg.train.steps)
          std::cerr << "step " << step << " total " << r.total << "\n";
      });
    } else if (enc->parsed()) {
      RunConfig cfg = resolve(en);
      const auto ck = load_checkpoint(checkpoint_path(en_ck, cfg));
      cfg = merge_checkpoint(cfg, ck);
      const ImageSample img{io::read_pgm(en_input, range_arg(en_range)), spacing_arg(en_res, "--input-res"), -1};
      NoGradGuard guard;
      const auto dist = ck.model->encode(img);
      io::RtfFile f;
      f.tensors = {{"mu", dist.mu},
                   {"logvar", dist.logvar},
                   {"source_resolution", Tensor::from({2}, {img.resolution.y, img.resolution.x})}};
      io::write_rtf(fs::path(en.out) / "latent.rtf", f);
      write_config(en, cfg);
    } else if (dec->parsed()) {
      RunConfig cfg = resolve(de);
      const auto ck = load_checkpoint(checkpoint_path(de_ck, cfg));
      cfg = merge_checkpoint(cfg, ck);
      const io::RtfFile lat = io::read_rtf(de_latent);
      LatentDistribution dist;
      for (const auto& [name, t] : lat.tensors) {
        if (name == "mu") dist.mu = t;
        if (name == "logvar") dist.logvar = t;
      }
      if (!dist.mu.defined() || !dist.logvar.defined()) throw FormatError("latent file lacks mu/logvar entries");
      NoGradGuard guard;
      Tensor z = dist.mu;
      if (de_sample) {
        Rng rng(derive_seed(cfg.train.seed, 0xdec0de));
        z = reparameterize(dist, rng).z;
      }
      const Tensor img = image_at(ck.model->decode(z, size_arg(de_size, "--target-size"), spacing_arg(de_res, "--target-res")), 0);
      io::write_pgm(fs::path(de.out) / "decoded.pgm", img, range_arg(de_range));
      io::write_rtf(fs::path(de.out) / "decoded.rtf", {{{"image", img}}, std::nullopt});
      write_config(de, cfg);
    } else if (sup->parsed()) {
      RunConfig cfg = resolve(sr);
      const auto ck = load_checkpoint(checkpoint_path(sr_ck, cfg));
      cfg = merge_checkpoint(cfg, ck);
      const GammaTable table = load_or_estimate_table(sr_table, cfg);
      const ImageSample img{io::read_pgm(sr_input, range_arg(sr_range)), spacing_arg(sr_in_res, "--input-res"), -1};
      const Spacing target_res = spacing_arg(sr_target_res, "--target-res");
      const Size2 target =
          sr_size.empty() ? Size2{static_cast<int>(std::lround(img.size().h * img.resolution.y / target_res.y)),
                                  static_cast<int>(std::lround(img.size().w * img.resolution.x / target_res.x))}
                          : size_arg(sr_size, "--target-size");
      const int draws = sr_draws > 0 ? sr_draws : cfg.eval.draws;
      const auto r = mc_superresolve(img, *ck.model, table, target, target_res, draws, cfg.train.seed);
      const fs::path out(sr.out);
      const double std_max = max_of(r.std_map);
      io::write_pgm(out / "mean.pgm", r.mean_image, range_arg(sr_range));
      io::write_pgm(out / "uncertainty.pgm", r.std_map, {0.0, std_max > 0.0 ? std_max : 1.0});
      io::write_rtf(out / "superres.rtf", {{{"mean", r.mean_image}, {"std", r.std_map}}, std::nullopt});
      io::CsvWriter stats({"draws", "gamma", "target_h", "target_w", "mean_std", "max_std"});
      stats.row(std::vector<double>{static_cast<double>(r.n_draws), lookup_gamma(table, img.resolution),
                                    static_cast<double>(target.h), static_cast<double>(target.w),
                                    ops::mean(r.std_map).item(), std_max});
      stats.save(out / "stats.csv");
      write_config(sr, cfg);
    } else if (evs->parsed()) {
      RunConfig cfg = resolve(ev);
      const auto ck = load_checkpoint(checkpoint_path(ev_ck, cfg));
      cfg = merge_checkpoint(cfg, ck);
      const GammaTable table = load_or_estimate_table(ev_table, cfg);
      const auto test = heldout_corpus(cfg, cfg.eval.n_test, kEvalStream);
      const auto rows = evaluate_superres(*ck.model, table, test, cfg.eval.factors, cfg.eval.draws, cfg.train.seed);
      io::CsvWriter csv({"factor", "psnr", "ssim", "mean_std", "baseline_psnr"});
      for (const auto& row : rows)
        csv.row({io::format_double(row.factor), opt_str(row.psnr), io::format_double(row.ssim),
                 io::format_double(row.mean_std), opt_str(row.baseline_psnr)});
      csv.save(fs::path(ev.out) / "superres.csv");
      write_config(ev, cfg);
    } else if (cls->parsed()) {
      RunConfig cfg = resolve(cl);
      const auto ck = load_checkpoint(checkpoint_path(cl_ck, cfg));
      cfg = merge_checkpoint(cfg, ck);
      const auto train_set = heldout_corpus(cfg, cfg.classify.n_train, kClassifyTrainStream);
      const auto test_set = heldout_corpus(cfg, cfg.classify.n_test, kClassifyTestStream);
      const fs::path out(cl.out);
      const auto grid = run_classifier_grid(*ck.model, train_set, test_set, cfg.classify.lr_factor, cfg.classify.classifier);
      io::write_text(out / "grid.csv", grid.csv());
      io::CsvWriter summary({"encoder", "cross_resolution_drop"});
      summary.row({"model", io::format_double(grid.cross_resolution_drop())});
      if (!cl_base.empty()) {
        const auto base = load_checkpoint(cl_base);
        const auto bgrid = run_classifier_grid(*base.model, train_set, test_set, cfg.classify.lr_factor,
                                               cfg.classify.classifier);
        io::write_text(out / "baseline_grid.csv", bgrid.csv());
        summary.row({"baseline", io::format_double(bgrid.cross_resolution_drop())});
      }
      summary.save(out / "summary.csv");
      write_config(cl, cfg);
    } else if (met->parsed()) {
      const RunConfig cfg = resolve(me);
      const auto range = range_arg(me_range);
      const Tensor a = io::read_pgm(me_a, range), b = io::read_pgm(me_b, range);
      const double L = range.hi - range.lo;
      io::CsvWriter csv({"ssim", "psnr"});
      csv.row({io::format_double(ssim(a, b, L)), opt_str(psnr(a, b, L))});
      csv.save(fs::path(me.out) / "metrics.csv");
      write_config(me, cfg);
    }
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    // Filesystem and stream failures.
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  }
  return 0;
}
