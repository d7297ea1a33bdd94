#include "textplace/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace textplace::nn {

AdamW::AdamW(std::vector<TensorPtr> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p || !p->has_grad())
      throw std::invalid_argument("optimizer parameter without grad buffer");
    m_.emplace_back(p->numel(), 0.0);
    v_.emplace_back(p->numel(), 0.0);
  }
}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = *params_[pi];
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < p.data.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps) +
                   config_.lr * config_.weight_decay * p.data[i];
    }
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

}  // namespace textplace::nn
