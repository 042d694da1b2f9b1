#include "cnl/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cnl::nn {

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<Param*> params)
    : cfg_(cfg), params_(std::move(params)) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Optimizer::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Optimizer::step() {
  std::vector<Matrix> updates;
  updates.reserve(params_.size());
  const std::size_t t = t_ + 1;
  std::vector<Matrix> m_next, v_next;

  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = *params_[i];
    if (!p.grad.allFinite()) throw std::runtime_error("optimizer: non-finite gradient in " + p.name);
    if (cfg_.kind == OptimizerKind::sgd) {
      updates.push_back(cfg_.lr * (p.grad + cfg_.weight_decay * p.value));
      continue;
    }
    Matrix m = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    Matrix v = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    Matrix step = (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    updates.push_back(cfg_.lr * (step + cfg_.weight_decay * p.value));
    m_next.push_back(std::move(m));
    v_next.push_back(std::move(v));
  }
  for (const auto& u : updates) {
    if (!u.allFinite()) throw std::runtime_error("optimizer: non-finite update");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i]->value -= updates[i];
    if (cfg_.kind == OptimizerKind::adam) {
      m_[i] = std::move(m_next[i]);
      v_[i] = std::move(v_next[i]);
    }
  }
  t_ = t;
}

}  // namespace cnl::nn
