#pragma once

#include "cnl/graph/graph.hpp"

#include <cstdint>

namespace cnl::graph {

/// L_sym = I - D^{-1/2} A D^{-1/2}; isolated nodes use a 1e-10 degree guard.
Matrix normalized_laplacian(const Graph& g);

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Matrix centers;
  std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations (Euclidean). Throws
/// std::runtime_error when every retry ends with an empty cluster.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 100, std::size_t max_retries = 10);

/// Normalized spectral clustering into k agencies.
AgencyPartition spectral_partition(const Graph& g, std::size_t k, std::uint64_t seed);

}  // namespace cnl::graph
