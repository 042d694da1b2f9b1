#include "cnl/nn/loss.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cnl::nn {

namespace {

IndexList resolve(const std::optional<IndexList>& rows, Eigen::Index n) {
  if (rows) {
    for (auto r : *rows) {
      if (r >= static_cast<std::size_t>(n)) throw std::out_of_range("loss: row index out of range");
    }
    return *rows;
  }
  IndexList all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      p(i, c) = std::exp(logits(i, c) - mx);
      z += p(i, c);
    }
    p.row(i) /= z;
  }
  return p;
}

LossResult mse_loss(const Matrix& pred, const Matrix& target, const std::optional<IndexList>& rows) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse: prediction and target shapes differ");
  }
  const auto sel = resolve(rows, pred.rows());
  LossResult r{0.0, Matrix::Zero(pred.rows(), pred.cols())};
  if (sel.empty()) return r;
  const double count = static_cast<double>(sel.size()) * static_cast<double>(pred.cols());
  for (auto i : sel) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      const double d = pred(ii, c) - target(ii, c);
      r.value += d * d;
      r.grad(ii, c) = 2.0 * d / count;
    }
  }
  r.value /= count;
  return r;
}

LossResult cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels,
                              const std::optional<IndexList>& rows) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("cross entropy: one label per row required");
  }
  const auto sel = resolve(rows, logits.rows());
  LossResult r{0.0, Matrix::Zero(logits.rows(), logits.cols())};
  if (sel.empty()) return r;
  const double batch = static_cast<double>(sel.size());
  for (auto i : sel) {
    const auto ii = static_cast<Eigen::Index>(i);
    const int y = labels[i];
    if (y < 0 || y >= logits.cols()) {
      throw std::invalid_argument("cross entropy: class id " + std::to_string(y) +
                                  " outside logit width " + std::to_string(logits.cols()));
    }
    const double mx = logits.row(ii).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(ii, c) - mx);
    const double log_z = mx + std::log(z);
    r.value -= logits(ii, y) - log_z;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      r.grad(ii, c) = (std::exp(logits(ii, c) - log_z) - (c == y ? 1.0 : 0.0)) / batch;
    }
  }
  r.value /= batch;
  return r;
}

LossResult compute_loss(LossKind kind, const Matrix& pred, const Matrix& target,
                        const std::optional<IndexList>& rows) {
  if (kind == LossKind::mse) return mse_loss(pred, target, rows);
  if (target.cols() != 1) throw std::invalid_argument("cross entropy: target must be a column of class ids");
  std::vector<int> labels(static_cast<std::size_t>(target.rows()));
  for (Eigen::Index i = 0; i < target.rows(); ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(target(i, 0));
  return cross_entropy_loss(pred, labels, rows);
}

}  // namespace cnl::nn
