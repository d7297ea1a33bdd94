#include "textplace/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace textplace::nn {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape_, bool with_grad)
    : shape(std::move(shape_)) {
  data.assign(shape_numel(shape), 0.0);
  if (with_grad) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

void Tensor::fill_uniform(Rng& rng, double bound) {
  for (double& x : data) x = rng.uniform(-bound, bound);
}

TensorPtr make_tensor(std::vector<int> shape, bool with_grad) {
  return std::make_shared<Tensor>(std::move(shape), with_grad);
}

TensorPtr make_param(std::vector<int> shape, Rng& rng, double fan_in) {
  auto t = make_tensor(std::move(shape), true);
  t->fill_uniform(rng, 1.0 / std::sqrt(std::max(1.0, fan_in)));
  return t;
}

TensorPtr make_const(std::vector<int> shape, const std::vector<double>& values) {
  auto t = make_tensor(std::move(shape), false);
  if (values.size() != t->numel())
    throw std::invalid_argument("const tensor size mismatch");
  t->data = values;
  return t;
}

TensorPtr Tape::make(std::vector<int> shape, bool with_grad) {
  auto t = make_tensor(std::move(shape), with_grad);
  nodes_.push_back(t);
  return t;
}

void Tape::record(std::function<void()> backward_op) {
  ops_.push_back(std::move(backward_op));
}

void Tape::backward() {
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace textplace::nn
