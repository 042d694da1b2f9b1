#include "cnl/graph/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cnl::graph {

Graph::Graph(std::size_t node_count, bool directed)
    : node_count_(node_count), directed_(directed) {}

void Graph::add_edge(std::size_t src, std::size_t dst, double weight) {
  if (src >= node_count_ || dst >= node_count_) {
    throw std::invalid_argument("edge (" + std::to_string(src) + "," + std::to_string(dst) +
                                ") references a node outside [0, " +
                                std::to_string(node_count_) + ")");
  }
  if (src == dst) {
    throw std::invalid_argument("self-loop on node " + std::to_string(src));
  }
  if (!directed_ && src > dst) std::swap(src, dst);
  edges_.push_back({src, dst, weight});
}

void Graph::sort_edges() {
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
}

std::vector<std::vector<Neighbor>> Graph::adjacency_list() const {
  std::vector<std::vector<Neighbor>> adj(node_count_);
  for (const auto& e : edges_) {
    adj[e.src].push_back({e.dst, e.weight});
    if (!directed_) adj[e.dst].push_back({e.src, e.weight});
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
  return adj;
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(node_count_, 0);
  for (const auto& e : edges_) {
    ++deg[e.src];
    if (!directed_) ++deg[e.dst];
  }
  return deg;
}

void AgencyPartition::validate(std::size_t node_count) const {
  if (assignment.size() != node_count) {
    throw std::invalid_argument("partition covers " + std::to_string(assignment.size()) +
                                " nodes, graph has " + std::to_string(node_count));
  }
  if (agency_count == 0) throw std::invalid_argument("partition has zero agencies");
  std::vector<std::size_t> sizes(agency_count, 0);
  for (auto a : assignment) {
    if (a >= agency_count) {
      throw std::invalid_argument("agency id " + std::to_string(a) + " out of range");
    }
    ++sizes[a];
  }
  for (std::size_t a = 0; a < agency_count; ++a) {
    if (sizes[a] == 0) throw std::invalid_argument("agency " + std::to_string(a) + " owns no nodes");
  }
}

IndexList AgencyPartition::members(std::size_t agency) const {
  IndexList out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == agency) out.push_back(i);
  }
  return out;
}

LocalGraph local_subgraph(const Graph& g, const AgencyPartition& p, std::size_t agency) {
  if (agency >= p.agency_count) {
    throw std::invalid_argument("unknown agency id " + std::to_string(agency));
  }
  p.validate(g.node_count());

  LocalGraph out;
  out.global_to_local.assign(g.node_count(), std::nullopt);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (p.assignment[i] == agency) {
      out.global_to_local[i] = out.local_to_global.size();
      out.local_to_global.push_back(i);
    }
  }

  out.graph = Graph(out.local_to_global.size(), g.directed());
  for (const auto& e : g.edges()) {
    const auto s = out.global_to_local[e.src];
    const auto d = out.global_to_local[e.dst];
    if (s && d) out.graph.add_edge(*s, *d, e.weight);
  }
  out.graph.sort_edges();

  if (g.node_features) {
    Matrix f(out.local_to_global.size(), g.node_features->cols());
    for (std::size_t i = 0; i < out.local_to_global.size(); ++i) {
      f.row(static_cast<Eigen::Index>(i)) =
          g.node_features->row(static_cast<Eigen::Index>(out.local_to_global[i]));
    }
    out.graph.node_features = std::move(f);
  }
  if (g.node_labels) {
    std::vector<int> labels;
    labels.reserve(out.local_to_global.size());
    for (auto gi : out.local_to_global) labels.push_back((*g.node_labels)[gi]);
    out.graph.node_labels = std::move(labels);
  }
  return out;
}

std::size_t cross_edge_count(const Graph& g, const AgencyPartition& p) {
  std::size_t count = 0;
  for (const auto& e : g.edges()) {
    if (p.assignment.at(e.src) != p.assignment.at(e.dst)) ++count;
  }
  return count;
}

Graph build_global_graph(const AgencyPartition& p, GlobalGraphMode mode, const Graph* source) {
  Graph out(p.agency_count);
  if (mode == GlobalGraphMode::fully_connected) {
    for (std::size_t a = 0; a < p.agency_count; ++a) {
      for (std::size_t b = a + 1; b < p.agency_count; ++b) out.add_edge(a, b, 1.0);
    }
    return out;
  }

  if (source == nullptr) {
    throw std::invalid_argument("by_reality global graph requires the source graph");
  }
  p.validate(source->node_count());
  std::vector<double> counts(p.agency_count * p.agency_count, 0.0);
  for (const auto& e : source->edges()) {
    auto a = p.assignment[e.src];
    auto b = p.assignment[e.dst];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    counts[a * p.agency_count + b] += 1.0;
  }
  for (std::size_t a = 0; a < p.agency_count; ++a) {
    for (std::size_t b = a + 1; b < p.agency_count; ++b) {
      const double w = counts[a * p.agency_count + b];
      if (w > 0.0) out.add_edge(a, b, w);
    }
  }
  return out;
}

double homophily(const Graph& g, const std::vector<int>& labels) {
  if (labels.size() < g.node_count()) {
    throw std::invalid_argument("labels do not cover every node");
  }
  if (g.edge_count() == 0) {
    throw std::domain_error("homophily is undefined for a graph without edges");
  }
  std::size_t same = 0;
  for (const auto& e : g.edges()) {
    if (labels[e.src] == labels[e.dst]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(g.edge_count());
}

}  // namespace cnl::graph
