#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace cnl {

/// Row-major dense matrix; rows are nodes (or samples), columns are features.
template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;

using IndexList = std::vector<std::size_t>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace cnl
