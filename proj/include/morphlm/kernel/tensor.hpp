#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <vector>

namespace morphlm::kernel {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense fp64 tensor, row-major. Values are immutable once produced by an op;
// only grad accumulates afterwards.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // same length as values when in use
  bool requires_grad = false;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  // Extent helpers for the common 2-D case.
  std::int64_t rows() const { return shape.size() >= 1 ? shape[0] : 1; }
  std::int64_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }

  double& at(std::int64_t r, std::int64_t c) { return values[r * cols() + c]; }
  double at(std::int64_t r, std::int64_t c) const {
    return values[r * cols() + c];
  }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) grad.assign(grad.size(), 0.0);
  }

  static TensorPtr zeros(std::vector<std::int64_t> shape,
                         bool requires_grad = false);
  static TensorPtr full(std::vector<std::int64_t> shape, double value,
                        bool requires_grad = false);
  static TensorPtr from(std::vector<std::int64_t> shape,
                        std::vector<double> values,
                        bool requires_grad = false);
  // 1-D convenience.
  static TensorPtr vec(std::vector<double> values, bool requires_grad = false);
};

std::string shape_str(const std::vector<std::int64_t>& shape);

}  // namespace morphlm::kernel
