#pragma once

#include "cnl/core/dense.hpp"
#include "cnl/graph/graph.hpp"

#include <stdexcept>
#include <utility>

namespace cnl::nn {

// Products below accumulate every output entry in increasing index order, so
// a row's result never depends on how many other rows the operand has.

template <typename Scalar>
DenseMatrix<Scalar> matmul(const DenseMatrix<Scalar>& a, const DenseMatrix<Scalar>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const Scalar aik = a(i, k);
      if (aik == Scalar(0)) continue;
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

/// aᵀ·b
template <typename Scalar>
DenseMatrix<Scalar> matmul_tn(const DenseMatrix<Scalar>& a, const DenseMatrix<Scalar>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row counts differ");
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(a.cols(), b.cols());
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      const Scalar aki = a(k, i);
      if (aki == Scalar(0)) continue;
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

/// a·bᵀ
template <typename Scalar>
DenseMatrix<Scalar> matmul_nt(const DenseMatrix<Scalar>& a, const DenseMatrix<Scalar>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: column counts differ");
  DenseMatrix<Scalar> out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      Scalar acc(0);
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

/// Row-compressed propagation operator; zero entries are dropped and each
/// row keeps its columns in increasing order.
struct Propagation {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> entries;

  static Propagation from_dense(const Matrix& m);
  Propagation transpose() const;
  Matrix to_dense() const;
  Matrix apply(const Matrix& h) const;
};

/// Â = D̃^{-1/2}(A+I)D̃^{-1/2} with D̃ the (weighted) degree matrix of A+I.
Matrix normalize_adjacency(const graph::Graph& g);

/// Weighted neighbor-mean operator (rows sum to 1). Isolated nodes get a zero row.
Matrix mean_adjacency(const graph::Graph& g);

/// Propagation operators shared by the graph layers for one graph.
struct GraphContext {
  std::size_t node_count = 0;
  Propagation gcn;
  Propagation gcn_t;
  Propagation mean;
  Propagation mean_t;

  static GraphContext build(const graph::Graph& g);
};

}  // namespace cnl::nn
