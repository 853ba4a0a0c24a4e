#include "morphlm/kernel/optim.hpp"

#include <cmath>

#include "morphlm/common.hpp"

namespace morphlm::kernel {

namespace {

// Shared Adam moment update; writes the raw update direction (including
// decoupled weight decay) into `dir`.
void adam_direction(Tensor& p, MomentState& s, const OptimUpdate& u,
                    std::vector<double>& dir) {
  if (p.grad.size() != p.values.size()) {
    throw ShapeError("optimizer step: parameter has no gradient");
  }
  s.ensure(p.values.size());
  s.step += 1;
  double bc1 = 1.0 - std::pow(u.beta1, static_cast<double>(s.step));
  double bc2 = 1.0 - std::pow(u.beta2, static_cast<double>(s.step));
  dir.resize(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    double g = p.grad[i];
    s.m[i] = u.beta1 * s.m[i] + (1.0 - u.beta1) * g;
    s.v[i] = u.beta2 * s.v[i] + (1.0 - u.beta2) * g * g;
    double mhat = s.m[i] / bc1;
    double vhat = s.v[i] / bc2;
    dir[i] = mhat / (std::sqrt(vhat) + u.eps) + u.weight_decay * p.values[i];
  }
}

}  // namespace

void adamw_step(Tensor& p, MomentState& s, const OptimUpdate& u) {
  std::vector<double> dir;
  adam_direction(p, s, u, dir);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    p.values[i] -= u.lr * dir[i];
  }
}

void lamb_step(Tensor& p, MomentState& s, const OptimUpdate& u) {
  std::vector<double> dir;
  adam_direction(p, s, u, dir);
  double wnorm = 0.0, unorm = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    wnorm += p.values[i] * p.values[i];
    unorm += dir[i] * dir[i];
  }
  wnorm = std::sqrt(wnorm);
  unorm = std::sqrt(unorm);
  double trust = (wnorm > 0.0 && unorm > 0.0) ? wnorm / unorm : 1.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    p.values[i] -= u.lr * trust * dir[i];
  }
}

double linear_warmup_decay(std::int64_t step, double peak_lr,
                           std::int64_t warmup_steps, std::int64_t max_steps) {
  if (step <= 0) return 0.0;
  if (warmup_steps > 0 && step <= warmup_steps) {
    return peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  }
  if (step >= max_steps) return 0.0;
  return peak_lr * static_cast<double>(max_steps - step) /
         static_cast<double>(max_steps - warmup_steps);
}

}  // namespace morphlm::kernel
