#pragma once

#include <cstdint>
#include <vector>

#include "morphlm/kernel/tensor.hpp"

namespace morphlm::kernel {

struct OptimUpdate {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

// First/second moment buffers for one parameter tensor.
struct MomentState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  void ensure(std::size_t n) {
    if (m.size() != n) m.assign(n, 0.0);
    if (v.size() != n) v.assign(n, 0.0);
  }
};

// Decoupled weight decay Adam. Reads p.grad, updates p.values in place.
void adamw_step(Tensor& p, MomentState& s, const OptimUpdate& u);

// Layerwise-adaptive variant: the AdamW direction is rescaled per tensor by
// ||w|| / ||update|| (1 when either norm vanishes).
void lamb_step(Tensor& p, MomentState& s, const OptimUpdate& u);

// Linear warmup to peak_lr at warmup_steps, then linear decay to 0 at
// max_steps. step is 1-based.
double linear_warmup_decay(std::int64_t step, double peak_lr,
                           std::int64_t warmup_steps, std::int64_t max_steps);

}  // namespace morphlm::kernel
