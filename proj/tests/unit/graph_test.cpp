#include "cnl/graph/epidemic.hpp"
#include "cnl/graph/generators.hpp"
#include "cnl/graph/graph.hpp"
#include "cnl/graph/io.hpp"
#include "cnl/graph/partition.hpp"
#include "cnl/graph/split.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <queue>
#include <set>

using namespace cnl;
using namespace cnl::graph;

namespace {

Graph triangle() {
  Graph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 2);
  return g;
}

Graph two_triangles() {
  Graph g(6);
  for (std::size_t base : {0, 3}) {
    g.add_edge(base, base + 1);
    g.add_edge(base + 1, base + 2);
    g.add_edge(base, base + 2);
  }
  return g;
}

std::vector<std::size_t> bfs_distance(const Graph& g, std::size_t src) {
  const auto adj = g.adjacency_list();
  std::vector<std::size_t> dist(g.node_count(), SIZE_MAX);
  std::queue<std::size_t> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (const auto& nb : adj[u]) {
      if (dist[nb.node] == SIZE_MAX) {
        dist[nb.node] = dist[u] + 1;
        q.push(nb.node);
      }
    }
  }
  return dist;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cnl_graph_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Graph, RejectsSelfLoopsAndOutOfRange) {
  Graph g(3);
  EXPECT_THROW(g.add_edge(1, 1), std::invalid_argument);
  EXPECT_THROW(g.add_edge(0, 3), std::invalid_argument);
  g.add_edge(2, 0);
  EXPECT_EQ(g.edges().front().src, 0u);
  EXPECT_EQ(g.edges().front().dst, 2u);
}

TEST(Generators, ErHasExactEdgeCountWithoutDuplicates) {
  const Graph g = generate_er(300, 1200, 7);
  EXPECT_EQ(g.node_count(), 300u);
  EXPECT_EQ(g.edge_count(), 1200u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : g.edges()) {
    EXPECT_LT(e.src, e.dst);
    EXPECT_TRUE(seen.insert({e.src, e.dst}).second);
  }
}

TEST(Generators, ErCompleteWhenAllPairsRequested) {
  const Graph g = generate_er(6, 15, 1);
  EXPECT_EQ(g.edge_count(), 15u);
  EXPECT_THROW(generate_er(6, 16, 1), std::invalid_argument);
}

TEST(Generators, ErDeterministicPerSeed) {
  EXPECT_EQ(generate_er(200, 500, 3).edges(), generate_er(200, 500, 3).edges());
  EXPECT_NE(generate_er(200, 500, 3).edges(), generate_er(200, 500, 4).edges());
}

TEST(Generators, ErMeanDegreeMatchesTwoMOverN) {
  const Graph g = generate_er(1000, 5000, 11);
  const auto deg = g.degrees();
  double sum = 0;
  for (auto d : deg) sum += static_cast<double>(d);
  EXPECT_DOUBLE_EQ(sum / 1000.0, 10.0);
}

TEST(Generators, BaSeedCliqueIsComplete) {
  const Graph g = generate_ba(4, 3, 5);
  EXPECT_EQ(g.edge_count(), 6u);
}

TEST(Generators, BaHeavyTail) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Graph g = generate_ba(1000, 3, seed);
    const auto deg = g.degrees();
    double mean = 0;
    std::size_t mx = 0;
    for (auto d : deg) {
      mean += static_cast<double>(d);
      mx = std::max(mx, d);
    }
    mean /= static_cast<double>(deg.size());
    EXPECT_GE(static_cast<double>(mx), 5.0 * mean) << "seed " << seed;
  }
}

TEST(Epidemic, SisWithoutTransitionsIsConstant) {
  const Graph g = generate_er(50, 120, 2);
  const auto trace = simulate_sis(g, {0.0, 0.0, 30}, {0, 5, 9}, 1);
  for (Eigen::Index t = 1; t < trace.infected.values.rows(); ++t) {
    EXPECT_EQ(trace.infected.values.row(t), trace.infected.values.row(0));
  }
}

TEST(Epidemic, SisRecoveryOnlyIsMonotoneAndDiesOut) {
  const Graph g = generate_er(80, 200, 4);
  const auto trace = simulate_sis(g, {0.0, 0.5, 60}, choose_initial_infected(80, 0.25, 3), 9);
  for (std::size_t t = 1; t < trace.counts.size(); ++t) {
    EXPECT_LE(trace.counts[t].infected, trace.counts[t - 1].infected);
    EXPECT_EQ(trace.counts[t].infected + trace.counts[t].susceptible, 80u);
  }
  EXPECT_EQ(trace.counts.back().infected, 0u);
}

TEST(Epidemic, SisCertainInfectionReachesEveryoneWithinEccentricity) {
  const Graph g = generate_er(60, 200, 8);
  const auto dist = bfs_distance(g, 0);
  std::size_t ecc = 0;
  for (auto d : dist) {
    ASSERT_NE(d, SIZE_MAX) << "test graph must be connected";
    ecc = std::max(ecc, d);
  }
  const auto trace = simulate_sis(g, {1.0, 0.0, ecc + 2}, {0}, 1);
  EXPECT_EQ(trace.counts[ecc].infected, 60u);
  for (std::size_t t = 0; t < ecc; ++t) {
    std::size_t reach = 0;
    for (auto d : dist) reach += d <= t ? 1 : 0;
    EXPECT_EQ(trace.counts[t].infected, reach);
  }
}

TEST(Epidemic, SirWithoutInfectionOnlyRecovers) {
  const Graph g = generate_er(40, 100, 5);
  const IndexList seeds = {1, 2, 3};
  const auto trace = simulate_sir(g, {0.0, 0.3, 80}, seeds, 4);
  EXPECT_EQ(trace.counts.back().recovered, seeds.size());
  for (const auto& c : trace.counts) EXPECT_LE(c.infected + c.recovered, seeds.size());
}

TEST(Epidemic, SirConservesPopulationAndRecoveredIsMonotone) {
  const Graph g = generate_ba(200, 2, 6);
  const auto trace = simulate_sir(g, {0.3, 0.2, 100}, choose_initial_infected(200, 0.02, 1), 11);
  for (std::size_t t = 0; t < trace.counts.size(); ++t) {
    const auto& c = trace.counts[t];
    EXPECT_EQ(c.susceptible + c.infected + c.recovered, 200u);
    if (t > 0) {
      EXPECT_GE(c.recovered, trace.counts[t - 1].recovered);
    }
  }
}

TEST(Epidemic, SirFullRecoveryAfterOneStep) {
  const Graph g = generate_er(30, 60, 3);
  const IndexList seeds = {0, 7};
  const auto trace = simulate_sir(g, {0.0, 1.0, 5}, seeds, 2);
  EXPECT_EQ(trace.counts[0].infected, 2u);
  EXPECT_EQ(trace.counts[1].infected, 0u);
  EXPECT_EQ(trace.counts[1].recovered, 2u);
  ASSERT_TRUE(trace.extinct_at.has_value());
  EXPECT_EQ(*trace.extinct_at, 1u);
}

TEST(Epidemic, RejectsRatesOutsideUnitInterval) {
  const Graph g = triangle();
  EXPECT_THROW(simulate_sis(g, {1.5, 0.1, 3}, {0}, 1), std::invalid_argument);
  EXPECT_THROW(simulate_sir(g, {0.1, -0.1, 3}, {0}, 1), std::invalid_argument);
  EXPECT_THROW(simulate_sis(g, {0.1, 0.1, 3}, {}, 1), std::invalid_argument);
}

TEST(Epidemic, BitReproducible) {
  const Graph g = generate_er(100, 300, 1);
  const auto seeds = choose_initial_infected(100, 0.05, 2);
  EXPECT_EQ(simulate_sis(g, {}, seeds, 5).infected.values, simulate_sis(g, {}, seeds, 5).infected.values);
}

TEST(Epidemic, RegionAggregationSumsColumns) {
  TimeSeriesPanel p{Matrix(2, 3)};
  p.values << 1, 0, 1, 0, 1, 1;
  const auto r = aggregate_by_region(p, {0, 1, 0}, 2);
  EXPECT_EQ(r.values(0, 0), 2);
  EXPECT_EQ(r.values(0, 1), 0);
  EXPECT_EQ(r.values(1, 0), 1);
  EXPECT_EQ(r.values(1, 1), 1);
}

TEST(Partition, TwoTrianglesSplitByComponent) {
  const Graph g = two_triangles();
  // brute force: the only 2-partition with cut 0 and both sides non-empty
  std::size_t best_cut = SIZE_MAX;
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < (1u << 6) - 1; ++mask) {
    std::size_t cut = 0;
    for (const auto& e : g.edges()) cut += ((mask >> e.src) & 1u) != ((mask >> e.dst) & 1u);
    if (cut < best_cut) {
      best_cut = cut;
      best_mask = mask;
    }
  }
  ASSERT_EQ(best_cut, 0u);
  const auto p = spectral_partition(g, 2, 3);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = 0; v < 6; ++v) {
      const bool same_oracle = ((best_mask >> u) & 1u) == ((best_mask >> v) & 1u);
      EXPECT_EQ(p.assignment[u] == p.assignment[v], same_oracle);
    }
  }
}

TEST(Partition, K4IntoFourSingletons) {
  Graph g(4);
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t v = u + 1; v < 4; ++v) g.add_edge(u, v);
  }
  const auto p = spectral_partition(g, 4, 1);
  std::set<std::size_t> ids(p.assignment.begin(), p.assignment.end());
  EXPECT_EQ(ids.size(), 4u);
}

TEST(Partition, ErFiveAgenciesNonEmptyAndDeterministic) {
  const Graph g = generate_er(300, 1200, 2);
  const auto a = spectral_partition(g, 5, 9);
  const auto b = spectral_partition(g, 5, 9);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_NO_THROW(a.validate(300));
}

TEST(Partition, RecoversDisconnectedComponents) {
  Graph g(12);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t b = 4 * c;
    g.add_edge(b, b + 1);
    g.add_edge(b + 1, b + 2);
    g.add_edge(b + 2, b + 3);
    g.add_edge(b, b + 3);
  }
  const auto p = spectral_partition(g, 3, 5);
  for (std::size_t u = 0; u < 12; ++u) {
    for (std::size_t v = 0; v < 12; ++v) EXPECT_EQ(p.assignment[u] == p.assignment[v], u / 4 == v / 4);
  }
}

TEST(Partition, RejectsBadK) {
  const Graph g = triangle();
  EXPECT_THROW(spectral_partition(g, 1, 0), std::invalid_argument);
  EXPECT_THROW(spectral_partition(g, 4, 0), std::invalid_argument);
}

TEST(Partition, LaplacianIsolatedNodeGuard) {
  Graph g(3);
  g.add_edge(0, 1);
  const Matrix l = normalized_laplacian(g);
  EXPECT_DOUBLE_EQ(l(2, 2), 1.0);
  EXPECT_NEAR(l(0, 1), -1.0, 1e-9);
}

TEST(LocalSubgraph, SingleAgencyIsIdentity) {
  const Graph g = generate_er(20, 40, 1);
  const AgencyPartition p{1, std::vector<std::size_t>(20, 0)};
  const auto lg = local_subgraph(g, p, 0);
  EXPECT_EQ(lg.graph.edges(), g.edges());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(lg.local_to_global[i], i);
}

TEST(LocalSubgraph, TriangleSplitKeepsInternalEdge) {
  const Graph g = triangle();
  const AgencyPartition p{2, {0, 0, 1}};
  const auto a = local_subgraph(g, p, 0);
  EXPECT_EQ(a.graph.node_count(), 2u);
  ASSERT_EQ(a.graph.edge_count(), 1u);
  EXPECT_EQ(a.graph.edges()[0], (Edge{0, 1, 1.0}));
  EXPECT_THROW(local_subgraph(g, p, 2), std::invalid_argument);
}

TEST(LocalSubgraph, EdgesPartitionIntoLocalAndCross) {
  const Graph g = generate_er(150, 600, 3);
  const auto p = spectral_partition(g, 4, 2);
  std::size_t total = cross_edge_count(g, p);
  for (std::size_t a = 0; a < 4; ++a) total += local_subgraph(g, p, a).graph.edge_count();
  EXPECT_EQ(total, g.edge_count());
}

TEST(GlobalGraph, FullyConnectedK5) {
  AgencyPartition p{5, {0, 1, 2, 3, 4}};
  const Graph gg = build_global_graph(p, GlobalGraphMode::fully_connected);
  EXPECT_EQ(gg.node_count(), 5u);
  EXPECT_EQ(gg.edge_count(), 10u);
}

TEST(GlobalGraph, ByRealityCountsCrossEdges) {
  const Graph g = triangle();
  const AgencyPartition p{2, {0, 0, 1}};
  const Graph gg = build_global_graph(p, GlobalGraphMode::by_reality, &g);
  ASSERT_EQ(gg.edge_count(), 1u);
  EXPECT_DOUBLE_EQ(gg.edges()[0].weight, 2.0);
  EXPECT_THROW(build_global_graph(p, GlobalGraphMode::by_reality), std::invalid_argument);
}

TEST(GlobalGraph, ByRealityDisjointComponentsIsEmpty) {
  const Graph g = two_triangles();
  const AgencyPartition p{2, {0, 0, 0, 1, 1, 1}};
  EXPECT_EQ(build_global_graph(p, GlobalGraphMode::by_reality, &g).edge_count(), 0u);
}

TEST(Homophily, Values) {
  Graph path(3);
  path.add_edge(0, 1);
  path.add_edge(1, 2);
  EXPECT_DOUBLE_EQ(homophily(path, {0, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(homophily(path, {4, 4, 4}), 1.0);
  EXPECT_THROW(homophily(Graph(3), {0, 0, 0}), std::domain_error);
}

TEST(Split, ChronologicalBoundaries) {
  const auto s = chronological_split(100);
  EXPECT_EQ(s.train.begin, 0u);
  EXPECT_EQ(s.train.end, 50u);
  EXPECT_EQ(s.val.end, 70u);
  EXPECT_EQ(s.test.end, 100u);
  EXPECT_THROW(chronological_split(100, {1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(Split, ChronologicalSlicesConcatenateToPanel) {
  TimeSeriesPanel p{Matrix::Random(37, 4)};
  const auto s = chronological_split(37);
  const auto a = slice(p, s.train), b = slice(p, s.val), c = slice(p, s.test);
  Matrix joined(37, 4);
  joined << a.values, b.values, c.values;
  EXPECT_EQ(joined, p.values);
}

TEST(Split, NodeSplitSizesAndCover) {
  const auto s = node_split(10, {0.6, 0.2, 0.2}, 4);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 10u);
  const auto again = node_split(10, {0.6, 0.2, 0.2}, 4);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
}

TEST(Io, RoundTripsAllFormats) {
  const auto dir = scratch_dir("roundtrip");
  Graph g = generate_er(12, 20, 1);
  write_edges(dir / "edges.csv", g);
  EXPECT_EQ(read_edges(dir / "edges.csv", 12).edges(), g.edges());

  Matrix f = Matrix::Random(12, 3);
  write_features(dir / "features.csv", f);
  EXPECT_EQ(read_features(dir / "features.csv"), f);

  const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  write_labels(dir / "labels.csv", labels);
  EXPECT_EQ(read_labels(dir / "labels.csv"), labels);

  TimeSeriesPanel panel{Matrix::Random(5, 12)};
  write_series(dir / "series.csv", panel);
  EXPECT_EQ(read_series(dir / "series.csv").values, panel.values);

  AgencyPartition p{3, {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2}};
  write_partition(dir / "partition.json", p);
  EXPECT_EQ(read_partition(dir / "partition.json").assignment, p.assignment);
}

TEST(Io, EdgesCollapseDuplicatesAndSkipSelfLoops) {
  const auto dir = scratch_dir("edges");
  std::ofstream(dir / "edges.csv") << "0,1\n1,0\n2,2\n1,2,0.5\n";
  const Graph g = read_edges(dir / "edges.csv");
  ASSERT_EQ(g.edge_count(), 2u);
  EXPECT_DOUBLE_EQ(g.edges()[1].weight, 0.5);
}

TEST(Io, LinqsCitations) {
  const auto dir = scratch_dir("linqs");
  std::ofstream(dir / "c.content") << "31336\t0\t1\tNeural_Networks\n"
                                      "1061127\t1\t0\tRule_Learning\n"
                                      "1106406\t1\t1\tNeural_Networks\n";
  // reverse duplicate, self citation, and an unknown paper
  std::ofstream(dir / "c.cites") << "31336\t1061127\n1061127\t31336\n1106406\t1106406\n"
                                    "1106406\t31336\n99\t31336\n";
  const Graph g = read_linqs(dir / "c.content", dir / "c.cites");
  ASSERT_EQ(g.node_count(), 3u);
  ASSERT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1, 1.0}));
  EXPECT_EQ(g.edges()[1], (Edge{0, 2, 1.0}));
  EXPECT_EQ(*g.node_labels, (std::vector<int>{0, 1, 0}));
  ASSERT_TRUE(g.node_features);
  EXPECT_EQ(g.node_features->cols(), 2);
  EXPECT_DOUBLE_EQ((*g.node_features)(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(homophily(g, *g.node_labels), 0.5);
}
