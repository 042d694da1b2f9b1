#pragma once

#include "cnl/nn/layers.hpp"

namespace cnl::nn {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with decoupled weight decay, or SGD with L2 weight decay folded into
/// the gradient. Holds moment estimates per parameter.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<Param*> params);

  /// Applies one update from the current gradients. Throws on a non-finite
  /// update and leaves parameters untouched in that case.
  void step();
  void zero_grad();
  std::size_t steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace cnl::nn
