#include "resinv/config.hpp"

#include <json.hpp>
#include <set>

#include "resinv/errors.hpp"

namespace resinv {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) contract_fail("config: " + path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) contract_fail("config: unknown key " + path_ + "." + it.key());
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& ex) {
      contract_fail("config: " + path_ + "." + key + ": " + ex.what());
    }
  }
  void size2(const char* key, Size2& out) {
    std::vector<int> v{out.h, out.w};
    get(key, v);
    if (v.size() != 2) contract_fail("config: " + path_ + "." + key + " must be [h, w]");
    out = {v[0], v[1]};
  }
  void spacing(const char* key, Spacing& out) {
    std::vector<double> v{out.y, out.x};
    get(key, v);
    if (v.size() != 2) contract_fail("config: " + path_ + "." + key + " must be [y, x]");
    out = {v[0], v[1]};
  }
  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }
  bool has(const char* key) const { return j_.contains(key); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  require(n_train >= 1, "config: n_train must be >= 1");
  require(gamma.samples >= 1, "config: gamma.samples must be >= 1");
  require(eval.draws >= 2, "config: eval.draws must be >= 2");
  require(eval.n_test >= 1, "config: eval.n_test must be >= 1");
  require(classify.lr_factor >= 1.0, "config: classify.lr_factor must be >= 1");
  require(data.class_count >= 1, "config: data.class_count must be >= 1");
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& ex) {
    contract_fail(std::string("config: invalid JSON: ") + ex.what());
  }
  RunConfig c;
  {
    Section top(root, "config");
    {
      Section m = top.sub("model");
      m.get("n_layers", c.model.n_layers);
      m.get("base_channels", c.model.base_channels);
      m.get("latent_channels", c.model.latent_channels);
      m.size2("latent_grid", c.model.latent_grid);
      m.spacing("highest_train_res", c.model.highest_train_res);
      std::string mode = c.model.resize_mode == ResizeMode::variable ? "variable" : "fixed_factor";
      m.get("resize_mode", mode);
      if (mode == "variable") c.model.resize_mode = ResizeMode::variable;
      else if (mode == "fixed_factor") c.model.resize_mode = ResizeMode::fixed_factor;
      else contract_fail("config: model.resize_mode must be \"variable\" or \"fixed_factor\"");
      if (m.has("latent_res")) {
        Spacing lr = c.model.latent_res();
        m.spacing("latent_res", lr);
        const Spacing want = c.model.latent_res();
        if (std::abs(lr.y - want.y) > 1e-9 * want.y || std::abs(lr.x - want.x) > 1e-9 * want.x)
          contract_fail("config: model.latent_res must equal highest_train_res * 2^n_layers (" + want.str() + ")");
      }
    }
    {
      Section t = top.sub("train");
      t.get("steps", c.train.steps);
      t.get("batch_size", c.train.batch_size);
      t.get("seed", c.train.seed);
      t.get("lr", c.train.lr);
      std::vector<double> range{c.train.lr_factor_min, c.train.lr_factor_max};
      t.get("lr_factor_range", range);
      if (range.size() != 2) contract_fail("config: train.lr_factor_range must be [min, max]");
      c.train.lr_factor_min = range[0];
      c.train.lr_factor_max = range[1];
      t.get("gamma_in_training", c.train.gamma_in_training);
      t.get("checkpoint_every", c.train.checkpoint_every);
    }
    {
      Section w = top.sub("loss");
      w.get("w_rec_l1", c.train.weights.w_rec_l1);
      w.get("w_perc", c.train.weights.w_perc);
      w.get("w_kl", c.train.weights.w_kl);
      w.get("w_latent", c.train.weights.w_latent);
      w.get("w_adv", c.train.weights.w_adv);
    }
    {
      Section d = top.sub("data");
      d.get("seed", c.data.seed);
      d.size2("size", c.data.size);
      d.spacing("resolution", c.data.resolution);
      d.get("class_count", c.data.class_count);
      d.get("n_train", c.n_train);
      d.get("coarse_wavelength_min", c.data.coarse_wavelength_min);
      d.get("coarse_wavelength_max", c.data.coarse_wavelength_max);
      d.get("fine_wavelength_min", c.data.fine_wavelength_min);
      d.get("fine_wavelength_max", c.data.fine_wavelength_max);
      d.get("texture_amplitude_min", c.data.texture_amplitude_min);
      d.get("texture_amplitude_max", c.data.texture_amplitude_max);
      d.get("shapes_min", c.data.shapes_min);
      d.get("shapes_max", c.data.shapes_max);
    }
    {
      Section g = top.sub("gamma");
      g.get("factors", c.gamma.factors);
      g.get("samples", c.gamma.samples);
    }
    {
      Section e = top.sub("eval");
      e.get("factors", c.eval.factors);
      e.get("draws", c.eval.draws);
      e.get("n_test", c.eval.n_test);
    }
    {
      Section k = top.sub("classify");
      k.get("steps", c.classify.classifier.steps);
      k.get("batch_size", c.classify.classifier.batch_size);
      k.get("lr", c.classify.classifier.lr);
      k.get("hidden", c.classify.classifier.hidden);
      k.get("seed", c.classify.classifier.seed);
      k.get("lr_factor", c.classify.lr_factor);
      k.get("n_train", c.classify.n_train);
      k.get("n_test", c.classify.n_test);
    }
    {
      Section p = top.sub("paths");
      p.get("data_dir", c.paths.data_dir);
      p.get("checkpoint", c.paths.checkpoint);
      p.get("gamma_table", c.paths.gamma_table);
    }
  }
  c.validate();
  return c;
}

std::string run_config_json(const RunConfig& c) {
  json j;
  j["model"] = {{"n_layers", c.model.n_layers},
                {"base_channels", c.model.base_channels},
                {"latent_channels", c.model.latent_channels},
                {"latent_grid", {c.model.latent_grid.h, c.model.latent_grid.w}},
                {"highest_train_res", {c.model.highest_train_res.y, c.model.highest_train_res.x}},
                {"latent_res", {c.model.latent_res().y, c.model.latent_res().x}},
                {"resize_mode", c.model.resize_mode == ResizeMode::variable ? "variable" : "fixed_factor"}};
  j["train"] = {{"steps", c.train.steps},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"lr", c.train.lr},
                {"lr_factor_range", {c.train.lr_factor_min, c.train.lr_factor_max}},
                {"gamma_in_training", c.train.gamma_in_training},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["loss"] = {{"w_rec_l1", c.train.weights.w_rec_l1},
               {"w_perc", c.train.weights.w_perc},
               {"w_kl", c.train.weights.w_kl},
               {"w_latent", c.train.weights.w_latent},
               {"w_adv", c.train.weights.w_adv}};
  j["data"] = {{"seed", c.data.seed},
               {"size", {c.data.size.h, c.data.size.w}},
               {"resolution", {c.data.resolution.y, c.data.resolution.x}},
               {"class_count", c.data.class_count},
               {"n_train", c.n_train},
               {"coarse_wavelength_min", c.data.coarse_wavelength_min},
               {"coarse_wavelength_max", c.data.coarse_wavelength_max},
               {"fine_wavelength_min", c.data.fine_wavelength_min},
               {"fine_wavelength_max", c.data.fine_wavelength_max},
               {"texture_amplitude_min", c.data.texture_amplitude_min},
               {"texture_amplitude_max", c.data.texture_amplitude_max},
               {"shapes_min", c.data.shapes_min},
               {"shapes_max", c.data.shapes_max}};
  j["gamma"] = {{"factors", c.gamma.factors}, {"samples", c.gamma.samples}};
  j["eval"] = {{"factors", c.eval.factors}, {"draws", c.eval.draws}, {"n_test", c.eval.n_test}};
  j["classify"] = {{"steps", c.classify.classifier.steps},
                   {"batch_size", c.classify.classifier.batch_size},
                   {"lr", c.classify.classifier.lr},
                   {"hidden", c.classify.classifier.hidden},
                   {"seed", c.classify.classifier.seed},
                   {"lr_factor", c.classify.lr_factor},
                   {"n_train", c.classify.n_train},
                   {"n_test", c.classify.n_test}};
  j["paths"] = {{"data_dir", c.paths.data_dir},
                {"checkpoint", c.paths.checkpoint},
                {"gamma_table", c.paths.gamma_table}};
  return j.dump(2) + "\n";
}

}  // namespace resinv
