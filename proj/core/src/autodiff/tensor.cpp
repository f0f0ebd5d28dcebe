#include "codespot/autodiff/tensor.hpp"

#include <functional>
#include <numeric>

#include "codespot/util/error.hpp"

namespace codespot::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorKind::kShape, "tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (numel(shape) != data.size()) {
    fail(ErrorKind::kShape, "tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorKind::kContract, "item() on tensor of shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

std::span<double> Tensor::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

}  // namespace codespot::ad
