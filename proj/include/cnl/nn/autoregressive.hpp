#pragma once

#include "cnl/nn/windows.hpp"

namespace cnl::nn {

/// Independent AR(p) per node, fit directly for horizon h by least squares:
/// x_{t+h} ≈ Σ_j a_j x_{t-j}. Nodes share neither data nor coefficients.
class ArBaseline {
 public:
  static ArBaseline fit(const Matrix& train_series, std::size_t order, std::size_t horizon,
                        double ridge = 1e-8);

  /// Coefficients for one node, lag 0 first.
  const Vector& coefficients(std::size_t node) const { return coef_.at(node); }
  std::size_t order() const { return order_; }
  std::size_t horizon() const { return horizon_; }

  /// Predicts from a node × L window (L ≥ order); uses the last `order` steps.
  Vector predict(const Matrix& window) const;
  /// sample × node predictions for a window set.
  Matrix predict(const WindowSet& windows) const;

 private:
  std::size_t order_ = 0;
  std::size_t horizon_ = 0;
  std::vector<Vector> coef_;
};

}  // namespace cnl::nn
