#pragma once

#include <cstdint>
#include <vector>

#include "textplace/tensor.hpp"

namespace textplace::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay: the decay term uses the parameter value
// itself and never flows through the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<TensorPtr> params, AdamWConfig config);

  void step();        // consumes current grads, then the caller zeroes them
  void zero_grad();

  const AdamWConfig& config() const { return config_; }
  int64_t step_count() const { return step_count_; }
  const std::vector<TensorPtr>& params() const { return params_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<double>>& m() { return m_; }
  std::vector<std::vector<double>>& v() { return v_; }
  void set_step_count(int64_t n) { step_count_ = n; }

 private:
  std::vector<TensorPtr> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

}  // namespace textplace::nn
