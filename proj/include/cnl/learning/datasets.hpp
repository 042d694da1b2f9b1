#pragma once

#include "cnl/graph/epidemic.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace cnl::learning {

/// Graph, optional per-node series and the agency partition, as stored in a
/// dataset directory (edges.csv, features.csv, labels.csv, series.csv,
/// partition.json).
struct Dataset {
  graph::Graph graph;
  std::optional<graph::TimeSeriesPanel> series;
  graph::AgencyPartition partition;

  std::size_t node_count() const { return graph.node_count(); }
  /// Throws std::invalid_argument when the parts disagree on the node count.
  void validate() const;
  /// Only edges.csv and partition.json are required.
  static Dataset load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

enum class Recipe { er_sis, er_sir, ba_sis, ba_sir, toy_classify, toy_bipartite };

std::string to_string(Recipe r);
Recipe recipe_from_string(const std::string& s);

struct RecipeParams {
  std::size_t n = 300;
  std::size_t m = 1200;       // ER edge count
  std::size_t m_attach = 4;   // BA edges per new node
  std::size_t agencies = 5;
  std::size_t steps = 100;
  double beta = 0.2;
  double mu = 0.1;
  double seed_fraction = 0.01;
  std::uint64_t seed = 0;

  /// Defaults for a recipe; toy recipes shrink n and the agency count.
  static RecipeParams defaults(Recipe r);
  nlohmann::json to_json() const;
  /// Missing keys keep the recipe defaults.
  static RecipeParams from_json(Recipe r, const nlohmann::json& j);
};

Dataset generate_dataset(Recipe r, const RecipeParams& p);

}  // namespace cnl::learning
