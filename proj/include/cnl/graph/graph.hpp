#pragma once

#include "cnl/core/dense.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace cnl::graph {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  std::size_t node;
  double weight;
};

/// Simple graph with optional node features and labels.
///
/// Undirected graphs keep every edge once with src < dst. Self-loops are
/// rejected; they only appear implicitly through adjacency normalization.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t node_count, bool directed = false);

  void add_edge(std::size_t src, std::size_t dst, double weight = 1.0);

  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool directed() const { return directed_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sorts edges lexicographically by (src, dst).
  void sort_edges();

  /// Per-node neighbor lists sorted by neighbor id. Undirected edges appear in
  /// both endpoint lists; directed edges only in the source list.
  std::vector<std::vector<Neighbor>> adjacency_list() const;

  std::vector<std::size_t> degrees() const;

  std::optional<Matrix> node_features;
  std::optional<std::vector<int>> node_labels;

 private:
  std::size_t node_count_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
};

/// Node-to-agency assignment.
struct AgencyPartition {
  std::size_t agency_count = 0;
  std::vector<std::size_t> assignment;

  /// Throws std::invalid_argument unless every id is in range and every
  /// agency owns at least one node.
  void validate(std::size_t node_count) const;
  IndexList members(std::size_t agency) const;
};

/// Induced subgraph of one agency with dense relabeling.
struct LocalGraph {
  Graph graph;
  IndexList local_to_global;
  std::vector<std::optional<std::size_t>> global_to_local;
};

LocalGraph local_subgraph(const Graph& g, const AgencyPartition& p, std::size_t agency);

std::size_t cross_edge_count(const Graph& g, const AgencyPartition& p);

enum class GlobalGraphMode { fully_connected, by_reality };

Graph build_global_graph(const AgencyPartition& p, GlobalGraphMode mode,
                         const Graph* source = nullptr);

/// Fraction of edges whose endpoints carry the same label.
double homophily(const Graph& g, const std::vector<int>& labels);

}  // namespace cnl::graph
