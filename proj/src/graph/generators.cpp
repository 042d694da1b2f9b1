#include "cnl/graph/generators.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace cnl::graph {

namespace {

// Pairs are enumerated up front when the full pair set is small enough.
constexpr std::size_t kEnumerationLimit = 1u << 22;

}  // namespace

Graph generate_er(std::size_t n, std::size_t m, std::uint64_t seed) {
  const std::size_t max_edges = n < 2 ? 0 : n * (n - 1) / 2;
  if (m > max_edges) {
    throw std::invalid_argument("generate_er: m exceeds n(n-1)/2");
  }
  std::mt19937_64 rng(seed);
  Graph g(n);

  if (max_edges <= kEnumerationLimit) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(max_edges);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
    }
    // partial Fisher-Yates
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
      std::swap(pairs[i], pairs[pick(rng)]);
      g.add_edge(pairs[i].first, pairs[i].second);
    }
  } else {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(m * 2);
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    while (seen.size() < m) {
      auto u = node(rng);
      auto v = node(rng);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      const std::uint64_t key = static_cast<std::uint64_t>(u) * n + v;
      if (seen.insert(key).second) g.add_edge(u, v);
    }
  }
  g.sort_edges();
  return g;
}

Graph generate_ba(std::size_t n, std::size_t m_attach, std::uint64_t seed) {
  if (m_attach < 1 || m_attach >= n) {
    throw std::invalid_argument("generate_ba: requires 1 <= m_attach < n");
  }
  std::mt19937_64 rng(seed);
  Graph g(n);
  // Each node appears once per incident edge end, so uniform draws from this
  // list are degree-proportional.
  std::vector<std::size_t> ends;

  for (std::size_t u = 0; u < m_attach; ++u) {
    for (std::size_t v = u + 1; v < m_attach; ++v) {
      g.add_edge(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  }

  std::vector<std::size_t> targets;
  for (std::size_t node = m_attach; node < n; ++node) {
    targets.clear();
    if (ends.empty()) {
      // single-node seed clique: attach uniformly
      for (std::size_t v = 0; v < m_attach; ++v) targets.push_back(v);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      while (targets.size() < m_attach) {
        const auto t = ends[pick(rng)];
        if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
      }
    }
    for (auto t : targets) {
      g.add_edge(t, node);
      ends.push_back(t);
      ends.push_back(node);
    }
  }
  g.sort_edges();
  return g;
}

}  // namespace cnl::graph
