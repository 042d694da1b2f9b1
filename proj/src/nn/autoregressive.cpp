#include "cnl/nn/autoregressive.hpp"

#include <stdexcept>

namespace cnl::nn {

ArBaseline ArBaseline::fit(const Matrix& series, std::size_t order, std::size_t horizon, double ridge) {
  const auto len = static_cast<std::size_t>(series.rows());
  if (order == 0) throw std::invalid_argument("ar: order must be positive");
  if (len <= order || len < order + horizon) {
    throw std::invalid_argument("ar: series too short for order " + std::to_string(order));
  }
  ArBaseline m;
  m.order_ = order;
  m.horizon_ = horizon;
  const auto p = static_cast<Eigen::Index>(order);
  const std::size_t samples = len - order - horizon + 1;

  for (Eigen::Index node = 0; node < series.cols(); ++node) {
    Matrix gram = Matrix::Zero(p, p);
    Vector rhs = Vector::Zero(p);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t t = s + order - 1;
      Vector lags(p);
      for (Eigen::Index j = 0; j < p; ++j) lags(j) = series(static_cast<Eigen::Index>(t) - j, node);
      gram += lags * lags.transpose();
      rhs += lags * series(static_cast<Eigen::Index>(t + horizon), node);
    }
    gram.diagonal().array() += ridge;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().cwiseAbs().minCoeff() <= 0.0) {
      throw std::runtime_error("ar: singular normal equations for node " + std::to_string(node));
    }
    Vector coef = ldlt.solve(rhs);
    if (!coef.allFinite()) throw std::runtime_error("ar: non-finite coefficients for node " + std::to_string(node));
    m.coef_.push_back(std::move(coef));
  }
  return m;
}

Vector ArBaseline::predict(const Matrix& window) const {
  if (static_cast<std::size_t>(window.rows()) != coef_.size()) {
    throw std::invalid_argument("ar: window node count differs from fitted model");
  }
  if (static_cast<std::size_t>(window.cols()) < order_) throw std::invalid_argument("ar: window shorter than order");
  Vector out(window.rows());
  const auto last = window.cols() - 1;
  for (Eigen::Index n = 0; n < window.rows(); ++n) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(order_); ++j) acc += coef_[static_cast<std::size_t>(n)](j) * window(n, last - j);
    out(n) = acc;
  }
  return out;
}

Matrix ArBaseline::predict(const WindowSet& windows) const {
  Matrix out(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(coef_.size()));
  for (std::size_t s = 0; s < windows.size(); ++s) out.row(static_cast<Eigen::Index>(s)) = predict(windows.inputs[s]).transpose();
  return out;
}

}  // namespace cnl::nn
