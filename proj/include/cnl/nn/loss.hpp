#pragma once

#include "cnl/core/dense.hpp"

#include <optional>

namespace cnl::nn {

enum class LossKind { mse, ce };

struct LossResult {
  double value = 0.0;
  Matrix grad;  // dL/d(pred), zero on rows outside the selection
};

/// Mean squared difference over the selected rows (all rows if none given).
LossResult mse_loss(const Matrix& pred, const Matrix& target,
                    const std::optional<IndexList>& rows = std::nullopt);

/// −mean log softmax(logits)[label] over the selected rows.
LossResult cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels,
                              const std::optional<IndexList>& rows = std::nullopt);

/// For ce, `target` is a single column of class ids.
LossResult compute_loss(LossKind kind, const Matrix& pred, const Matrix& target,
                        const std::optional<IndexList>& rows = std::nullopt);

Matrix softmax_rows(const Matrix& logits);

}  // namespace cnl::nn
