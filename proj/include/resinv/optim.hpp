#pragma once

#include <cstdint>
#include <vector>

#include "resinv/tensor.hpp"

namespace resinv {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected adaptive-moment state for a fixed list of parameters.
struct OptimizerState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, AdamOptions options = {});

/// One update of every parameter from its accumulated gradient (missing
/// gradients count as zero). Increments state.step.
void adam_step(std::vector<Tensor>& params, OptimizerState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace resinv
