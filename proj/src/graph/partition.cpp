#include "cnl/graph/partition.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace cnl::graph {

Matrix normalized_laplacian(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : g.edges()) {
    a(static_cast<Eigen::Index>(e.src), static_cast<Eigen::Index>(e.dst)) += e.weight;
    if (!g.directed()) a(static_cast<Eigen::Index>(e.dst), static_cast<Eigen::Index>(e.src)) += e.weight;
  }
  Vector inv_sqrt = (a.rowwise().sum().array() + 1e-10).rsqrt();
  Matrix l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  return l;
}

namespace {

double squared_distance(const Matrix& pts, Eigen::Index i, const Matrix& centers, Eigen::Index c) {
  return (pts.row(i) - centers.row(c)).squaredNorm();
}

Matrix seed_plus_plus(const Matrix& pts, std::size_t k, std::mt19937_64& rng) {
  const auto n = pts.rows();
  Matrix centers(static_cast<Eigen::Index>(k), pts.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = pts.row(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = squared_distance(pts, i, centers, static_cast<Eigen::Index>(c - 1));
      auto& slot = d2[static_cast<std::size_t>(i)];
      if (d < slot) slot = d;
      total += slot;
    }
    Eigen::Index chosen = first(rng);
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= target && d2[static_cast<std::size_t>(i)] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(static_cast<Eigen::Index>(c)) = pts.row(chosen);
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& pts, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations, std::size_t max_retries) {
  const auto n = static_cast<std::size_t>(pts.rows());
  if (k == 0 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= point count");
  std::mt19937_64 rng(seed);

  for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
    KMeansResult r;
    r.centers = seed_plus_plus(pts, k, rng);
    r.assignment.assign(n, 0);
    std::vector<std::size_t> sizes(k, 0);
    bool empty = false;

    for (std::size_t it = 0; it < max_iterations; ++it) {
      bool changed = it == 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = squared_distance(pts, static_cast<Eigen::Index>(i), r.centers,
                                            static_cast<Eigen::Index>(c));
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        if (best != r.assignment[i]) changed = true;
        r.assignment[i] = best;
      }
      r.iterations = it + 1;

      std::fill(sizes.begin(), sizes.end(), 0);
      Matrix sums = Matrix::Zero(r.centers.rows(), r.centers.cols());
      for (std::size_t i = 0; i < n; ++i) {
        sums.row(static_cast<Eigen::Index>(r.assignment[i])) += pts.row(static_cast<Eigen::Index>(i));
        ++sizes[r.assignment[i]];
      }
      empty = false;
      for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) {
          empty = true;
          break;
        }
        r.centers.row(static_cast<Eigen::Index>(c)) =
            sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(sizes[c]);
      }
      if (empty || !changed) break;
    }
    if (!empty) return r;
  }
  throw std::runtime_error("kmeans: a cluster stayed empty after " +
                           std::to_string(max_retries) + " re-seeds");
}

AgencyPartition spectral_partition(const Graph& g, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > g.node_count()) {
    throw std::invalid_argument("spectral_partition: need 2 <= k <= node count");
  }
  const Matrix lap = normalized_laplacian(g);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");

  // eigenvalues come back in ascending order
  Matrix embed = solver.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < embed.rows(); ++i) {
    const double norm = embed.row(i).norm();
    if (norm > 0.0) embed.row(i) /= norm;
  }

  auto km = kmeans(embed, k, seed);
  return AgencyPartition{k, std::move(km.assignment)};
}

}  // namespace cnl::graph
