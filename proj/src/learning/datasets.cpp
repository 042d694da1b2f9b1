#include "cnl/learning/datasets.hpp"

#include "cnl/graph/generators.hpp"
#include "cnl/graph/io.hpp"
#include "cnl/graph/partition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cnl::learning {

namespace fs = std::filesystem;

void Dataset::validate() const {
  const auto n = graph.node_count();
  partition.validate(n);
  if (graph.node_features && static_cast<std::size_t>(graph.node_features->rows()) != n) {
    throw std::invalid_argument("dataset: features.csv has " + std::to_string(graph.node_features->rows()) +
                                " rows for " + std::to_string(n) + " nodes");
  }
  if (graph.node_labels && graph.node_labels->size() != n) {
    throw std::invalid_argument("dataset: labels.csv length differs from the node count");
  }
  if (series) {
    series->validate();
    if (series->series_count() != n) throw std::invalid_argument("dataset: series.csv column count differs from the node count");
  }
}

Dataset Dataset::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
  Dataset d;
  d.partition = graph::read_partition(dir / "partition.json");
  d.graph = graph::read_edges(dir / "edges.csv", d.partition.assignment.size());
  if (fs::exists(dir / "features.csv")) d.graph.node_features = graph::read_features(dir / "features.csv");
  if (fs::exists(dir / "labels.csv")) d.graph.node_labels = graph::read_labels(dir / "labels.csv");
  if (fs::exists(dir / "series.csv")) d.series = graph::read_series(dir / "series.csv");
  d.validate();
  return d;
}

void Dataset::save(const fs::path& dir) const {
  validate();
  fs::create_directories(dir);
  graph::write_edges(dir / "edges.csv", graph);
  if (graph.node_features) graph::write_features(dir / "features.csv", *graph.node_features);
  if (graph.node_labels) graph::write_labels(dir / "labels.csv", *graph.node_labels);
  if (series) graph::write_series(dir / "series.csv", *series);
  graph::write_partition(dir / "partition.json", partition);
}

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::er_sis: return "er_sis";
    case Recipe::er_sir: return "er_sir";
    case Recipe::ba_sis: return "ba_sis";
    case Recipe::ba_sir: return "ba_sir";
    case Recipe::toy_classify: return "toy_classify";
    case Recipe::toy_bipartite: return "toy_bipartite";
  }
  return "?";
}

Recipe recipe_from_string(const std::string& s) {
  for (auto r : {Recipe::er_sis, Recipe::er_sir, Recipe::ba_sis, Recipe::ba_sir, Recipe::toy_classify,
                 Recipe::toy_bipartite}) {
    if (to_string(r) == s) return r;
  }
  throw std::invalid_argument("unknown recipe: " + s);
}

RecipeParams RecipeParams::defaults(Recipe r) {
  RecipeParams p;
  if (r == Recipe::toy_classify) {
    p.n = 90;
    p.agencies = 3;
  } else if (r == Recipe::toy_bipartite) {
    p.n = 100;
    p.agencies = 2;
  }
  return p;
}

nlohmann::json RecipeParams::to_json() const {
  return {{"n", n},       {"m", m},   {"m_attach", m_attach}, {"agencies", agencies},
          {"steps", steps}, {"beta", beta}, {"mu", mu},      {"seed_fraction", seed_fraction},
          {"seed", seed}};
}

RecipeParams RecipeParams::from_json(Recipe r, const nlohmann::json& j) {
  RecipeParams p = defaults(r);
  p.n = j.value("n", p.n);
  p.m = j.value("m", p.m);
  p.m_attach = j.value("m_attach", p.m_attach);
  p.agencies = j.value("agencies", p.agencies);
  p.steps = j.value("steps", p.steps);
  p.beta = j.value("beta", p.beta);
  p.mu = j.value("mu", p.mu);
  p.seed_fraction = j.value("seed_fraction", p.seed_fraction);
  p.seed = j.value("seed", p.seed);
  return p;
}

namespace {

Matrix degree_features(const graph::Graph& g) {
  const auto deg = g.degrees();
  const double top = std::max<double>(1.0, static_cast<double>(*std::max_element(deg.begin(), deg.end())));
  Matrix f(static_cast<Eigen::Index>(g.node_count()), 1);
  for (std::size_t i = 0; i < deg.size(); ++i) f(static_cast<Eigen::Index>(i), 0) = static_cast<double>(deg[i]) / top;
  return f;
}

Dataset contagion(Recipe r, const RecipeParams& p) {
  const bool ba = r == Recipe::ba_sis || r == Recipe::ba_sir;
  const bool sir = r == Recipe::er_sir || r == Recipe::ba_sir;
  Dataset d;
  d.graph = ba ? graph::generate_ba(p.n, p.m_attach, p.seed) : graph::generate_er(p.n, p.m, p.seed);
  const auto seeds = graph::choose_initial_infected(p.n, p.seed_fraction, p.seed + 1);
  const graph::ContagionParams cp{p.beta, p.mu, p.steps};
  auto trace = sir ? graph::simulate_sir(d.graph, cp, seeds, p.seed + 2) : graph::simulate_sis(d.graph, cp, seeds, p.seed + 2);
  d.graph.node_features = degree_features(d.graph);
  std::vector<int> ever(p.n, 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    ever[i] = trace.infected.values.col(static_cast<Eigen::Index>(i)).maxCoeff() > 0.5 ? 1 : 0;
  }
  d.graph.node_labels = std::move(ever);
  d.series = std::move(trace.infected);
  d.partition = graph::spectral_partition(d.graph, p.agencies, p.seed + 3);
  return d;
}

// Agencies own contiguous blocks of nodes. Each agency has a feature centre;
// a node's label is the sign of v·(x_i − own centre + mean centre of the
// other agencies) plus noise. Edges ignore labels.
Dataset toy_classify(const RecipeParams& p) {
  const std::size_t k = std::max<std::size_t>(2, p.agencies);
  if (p.n < 2 * k) throw std::invalid_argument("toy_classify: need at least two nodes per agency");
  constexpr std::size_t f = 4;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vector> centre(k, Vector::Zero(f));
  for (auto& c : centre)
    for (std::size_t j = 0; j < f; ++j) c(static_cast<Eigen::Index>(j)) = 1.5 * normal(rng);
  Vector v = Vector::Zero(f);
  v(0) = 1.0;
  v(1) = 0.5;

  Dataset d;
  d.partition.agency_count = k;
  d.partition.assignment.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) d.partition.assignment[i] = std::min(k - 1, i * k / p.n);

  Matrix x(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(f));
  std::vector<int> labels(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto a = d.partition.assignment[i];
    Vector others = Vector::Zero(f);
    for (std::size_t b = 0; b < k; ++b)
      if (b != a) others += centre[b];
    others /= static_cast<double>(k - 1);
    Vector xi(f);
    for (std::size_t j = 0; j < f; ++j) xi(static_cast<Eigen::Index>(j)) = centre[a](static_cast<Eigen::Index>(j)) + normal(rng);
    x.row(static_cast<Eigen::Index>(i)) = xi.transpose();
    labels[i] = v.dot(xi - centre[a] + others) + 0.2 * normal(rng) > 0.0 ? 1 : 0;
  }

  d.graph = graph::Graph(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = i + 1; j < p.n; ++j) {
      const bool same_agency = d.partition.assignment[i] == d.partition.assignment[j];
      const double prob = same_agency ? 0.08 : 0.01;
      if (unit(rng) < prob) d.graph.add_edge(i, j);
    }
  }
  d.graph.node_features = std::move(x);
  d.graph.node_labels = std::move(labels);
  return d;
}

// Users and items with latent factors; an edge carries a rating in [1, 5].
Dataset toy_bipartite(const RecipeParams& p) {
  constexpr std::size_t latent = 3;
  const std::size_t users = p.n * 3 / 5;
  const std::size_t items = p.n - users;
  if (users == 0 || items == 0) throw std::invalid_argument("toy_bipartite: n too small");
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix factors(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(latent));
  for (Eigen::Index i = 0; i < factors.rows(); ++i)
    for (Eigen::Index j = 0; j < factors.cols(); ++j) factors(i, j) = 0.8 * normal(rng);

  Dataset d;
  d.graph = graph::Graph(p.n);
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t it = users; it < p.n; ++it) {
      if (unit(rng) >= 0.15) continue;
      const double r = 3.0 + factors.row(static_cast<Eigen::Index>(u)).dot(factors.row(static_cast<Eigen::Index>(it))) +
                       0.3 * normal(rng);
      d.graph.add_edge(u, it, std::clamp(std::round(r), 1.0, 5.0));
    }
  }
  Matrix feats(static_cast<Eigen::Index>(p.n), static_cast<Eigen::Index>(latent + 1));
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < latent; ++j) {
      feats(r, static_cast<Eigen::Index>(j)) = factors(r, static_cast<Eigen::Index>(j)) + 0.3 * normal(rng);
    }
    feats(r, static_cast<Eigen::Index>(latent)) = i < users ? 1.0 : 0.0;
  }
  d.graph.node_features = std::move(feats);
  std::vector<int> kind(p.n);
  for (std::size_t i = 0; i < p.n; ++i) kind[i] = i < users ? 0 : 1;
  d.graph.node_labels = std::move(kind);
  d.partition = graph::spectral_partition(d.graph, std::max<std::size_t>(1, p.agencies), p.seed + 1);
  return d;
}

}  // namespace

Dataset generate_dataset(Recipe r, const RecipeParams& p) {
  Dataset d;
  switch (r) {
    case Recipe::er_sis:
    case Recipe::er_sir:
    case Recipe::ba_sis:
    case Recipe::ba_sir: d = contagion(r, p); break;
    case Recipe::toy_classify: d = toy_classify(p); break;
    case Recipe::toy_bipartite: d = toy_bipartite(p); break;
  }
  d.graph.sort_edges();
  d.validate();
  return d;
}

}  // namespace cnl::learning
