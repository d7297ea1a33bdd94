#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "textplace/rng.hpp"

namespace textplace::nn {

// Dense double tensor with an optional gradient accumulator. Tensors without
// a gradient buffer are constants: ops skip accumulating into them.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty, or same length as data

  Tensor() = default;
  Tensor(std::vector<int> shape_, bool with_grad);

  size_t numel() const { return data.size(); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  bool has_grad() const { return !grad.empty(); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double& gat(int r, int c) { return grad[static_cast<size_t>(r) * cols() + c]; }

  void zero_grad();
  void fill_uniform(Rng& rng, double bound);  // U(-bound, bound)
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool with_grad = true);
TensorPtr make_param(std::vector<int> shape, Rng& rng, double fan_in);
TensorPtr make_const(std::vector<int> shape, const std::vector<double>& values);

size_t shape_numel(const std::vector<int>& shape);

// Reverse-mode differentiation over an explicitly recorded operation
// sequence: each forward op pushes one backward closure, and backward() runs
// them in reverse.
class Tape {
 public:
  TensorPtr make(std::vector<int> shape, bool with_grad = true);
  void record(std::function<void()> backward_op);
  void backward();
  size_t size() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
  std::vector<TensorPtr> nodes_;
};

}  // namespace textplace::nn
