#include "resinv/optim.hpp"

#include <cmath>

#include "resinv/errors.hpp"

namespace resinv {

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, AdamOptions options) {
  OptimizerState s;
  s.options = options;
  for (const Tensor& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, OptimizerState& state) {
  require(params.size() == state.m.size(), "adam_step: parameter list does not match optimizer state");
  require(state.step >= 0, "adam_step: negative step counter");
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    require(m.size() == p.numel(), "adam_step: moment shape mismatch for parameter " + std::to_string(i));
    auto w = p.mutable_data();
    if (!p.has_grad()) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] *= o.beta1;
        v[j] *= o.beta2;
        w[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
      }
      continue;
    }
    const auto g = p.mutable_grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      w[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace resinv
