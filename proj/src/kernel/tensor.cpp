#include "morphlm/kernel/tensor.hpp"

#include <string>

#include "morphlm/common.hpp"

namespace morphlm::kernel {

namespace {
std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " +
                                 shape_str(shape));
    n *= d;
  }
  return n;
}
}  // namespace

TensorPtr Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

TensorPtr Tensor::full(std::vector<std::int64_t> shape, double value,
                       bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  std::int64_t n = checked_numel(shape);
  t->shape = std::move(shape);
  t->values.assign(static_cast<std::size_t>(n), value);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::from(std::vector<std::int64_t> shape,
                       std::vector<double> values, bool requires_grad) {
  std::int64_t n = checked_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::vec(std::vector<double> values, bool requires_grad) {
  std::int64_t n = static_cast<std::int64_t>(values.size());
  return from({n}, std::move(values), requires_grad);
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace morphlm::kernel
