#include "cnl/nn/matrix_ops.hpp"

#include <algorithm>
#include <cmath>

namespace cnl::nn {

Propagation Propagation::from_dense(const Matrix& m) {
  Propagation p;
  p.rows = static_cast<std::size_t>(m.rows());
  p.cols = static_cast<std::size_t>(m.cols());
  p.entries.resize(p.rows);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) p.entries[static_cast<std::size_t>(i)].emplace_back(static_cast<std::size_t>(j), m(i, j));
    }
  }
  return p;
}

Propagation Propagation::transpose() const {
  Propagation t;
  t.rows = cols;
  t.cols = rows;
  t.entries.resize(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (const auto& [j, v] : entries[i]) t.entries[j].emplace_back(i, v);
  }
  return t;
}

Matrix Propagation::to_dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (const auto& [j, v] : entries[i]) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
  }
  return m;
}

Matrix Propagation::apply(const Matrix& h) const {
  if (static_cast<std::size_t>(h.rows()) != cols) {
    throw std::invalid_argument("propagation: operand has " + std::to_string(h.rows()) +
                                " rows, expected " + std::to_string(cols));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), h.cols());
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (const auto& [j, v] : entries[i]) {
      for (Eigen::Index c = 0; c < h.cols(); ++c) row(c) += v * h(static_cast<Eigen::Index>(j), c);
    }
  }
  return out;
}

namespace {

// Adjacency rows with the unit self-loop merged in, sorted by column.
std::vector<std::vector<graph::Neighbor>> rows_with_self_loops(const graph::Graph& g) {
  auto adj = g.adjacency_list();
  for (std::size_t i = 0; i < adj.size(); ++i) {
    auto& row = adj[i];
    auto it = std::lower_bound(row.begin(), row.end(), i,
                               [](const graph::Neighbor& nb, std::size_t v) { return nb.node < v; });
    row.insert(it, graph::Neighbor{i, 1.0});
  }
  return adj;
}

std::vector<double> row_sums(const std::vector<std::vector<graph::Neighbor>>& rows) {
  std::vector<double> out(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& nb : rows[i]) out[i] += nb.weight;
  }
  return out;
}

}  // namespace

Matrix normalize_adjacency(const graph::Graph& g) {
  return GraphContext::build(g).gcn.to_dense();
}

Matrix mean_adjacency(const graph::Graph& g) {
  return GraphContext::build(g).mean.to_dense();
}

GraphContext GraphContext::build(const graph::Graph& g) {
  const auto n = g.node_count();
  GraphContext ctx;
  ctx.node_count = n;

  const auto loops = rows_with_self_loops(g);
  const auto deg = row_sums(loops);
  ctx.gcn.rows = ctx.gcn.cols = n;
  ctx.gcn.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = 1.0 / std::sqrt(deg[i]);
    for (const auto& nb : loops[i]) {
      const double v = di * nb.weight * (1.0 / std::sqrt(deg[nb.node]));
      if (v != 0.0) ctx.gcn.entries[i].emplace_back(nb.node, v);
    }
  }

  // weighted neighbor mean; zero total weight leaves the row empty
  const auto adj = g.adjacency_list();
  const auto wsum = row_sums(adj);
  ctx.mean.rows = ctx.mean.cols = n;
  ctx.mean.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (wsum[i] == 0.0) continue;
    for (const auto& nb : adj[i]) {
      const double v = nb.weight / wsum[i];
      if (v != 0.0) ctx.mean.entries[i].emplace_back(nb.node, v);
    }
  }

  ctx.gcn_t = ctx.gcn.transpose();
  ctx.mean_t = ctx.mean.transpose();
  return ctx;
}

}  // namespace cnl::nn
