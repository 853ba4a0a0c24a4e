#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "morphlm/kernel/rng.hpp"
#include "morphlm/kernel/tape.hpp"

namespace testutil {

using morphlm::kernel::Rng;
using morphlm::kernel::Tape;
using morphlm::kernel::Tensor;
using morphlm::kernel::TensorPtr;

inline TensorPtr random_tensor(std::vector<std::int64_t> shape, Rng& rng,
                               bool requires_grad = true, double lo = -2.0,
                               double hi = 2.0) {
  auto t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t->values) v = rng.uniform(lo, hi);
  return t;
}

// Central finite differences (h = 1e-5) against the analytic gradient of a
// scalar-valued rebuildable function of `inputs`. Relative error uses
// max(1, |analytic|, |fd|) as the denominator.
inline double max_grad_rel_err(
    const std::vector<TensorPtr>& inputs,
    const std::function<double(bool record_grad)>& eval_loss,
    const std::function<void()>& run_backward) {
  const double h = 1e-5;
  eval_loss(true);
  run_backward();
  double worst = 0.0;
  for (const TensorPtr& input : inputs) {
    for (std::size_t i = 0; i < input->values.size(); ++i) {
      double saved = input->values[i];
      input->values[i] = saved + h;
      double up = eval_loss(false);
      input->values[i] = saved - h;
      double down = eval_loss(false);
      input->values[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double analytic = input->grad.empty() ? 0.0 : input->grad[i];
      double err = std::abs(analytic - fd) /
                   std::max({1.0, std::abs(analytic), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Convenience: gradient-check one op by reducing its output against fixed
// random coefficients.
inline double grad_check_op(
    std::vector<TensorPtr> inputs,
    const std::function<TensorPtr(Tape&)>& build, std::uint64_t seed = 7) {
  std::vector<TensorPtr> current = inputs;
  TensorPtr coeffs;
  Tape last_tape;  // survives so grads remain inspectable
  auto eval = [&, seed](bool record) -> double {
    Tape tape;
    TensorPtr out = build(tape);
    if (!coeffs) {
      Rng rng(seed);
      coeffs = random_tensor(out->shape, rng, false, -1.0, 1.0);
    }
    TensorPtr loss = tape.sum(tape.mul(out, coeffs));
    if (record) {
      for (auto& in : inputs) in->zero_grad();
      tape.backward(loss);
    }
    return loss->values[0];
  };
  return max_grad_rel_err(inputs, eval, [] {});
}

inline std::string data_dir() { return MORPHLM_DATA_DIR; }
inline std::string cli_path() { return MORPHLM_CLI_PATH; }

}  // namespace testutil
