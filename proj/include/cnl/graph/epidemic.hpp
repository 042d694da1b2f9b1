#pragma once

#include "cnl/graph/graph.hpp"

#include <cstdint>

namespace cnl::graph {

/// Rows are time steps, columns are nodes (or regions after aggregation).
struct TimeSeriesPanel {
  Matrix values;

  std::size_t steps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t series_count() const { return static_cast<std::size_t>(values.cols()); }
  void validate() const;
};

struct CompartmentCounts {
  std::size_t susceptible = 0;
  std::size_t infected = 0;
  std::size_t recovered = 0;
};

/// Output of a contagion run. Row t of `infected` holds 0/1 infection
/// indicators after t synchronous updates (row 0 is the initial state).
struct EpidemicTrace {
  TimeSeriesPanel infected;
  std::vector<CompartmentCounts> counts;
  /// First step with no infected node, if the process died out.
  std::optional<std::size_t> extinct_at;
};

struct ContagionParams {
  double beta = 0.2;
  double mu = 0.1;
  std::size_t steps = 100;
};

/// Synchronous SIS: a susceptible node with k infected neighbors becomes
/// infected with probability 1-(1-beta)^k; an infected node recovers to
/// susceptible with probability mu.
EpidemicTrace simulate_sis(const Graph& g, const ContagionParams& params,
                           const IndexList& initial_infected, std::uint64_t seed);

/// Synchronous SIR; recovered nodes are permanently immune. Once no infected
/// node remains the state is frozen for the remaining steps.
EpidemicTrace simulate_sir(const Graph& g, const ContagionParams& params,
                           const IndexList& initial_infected, std::uint64_t seed);

/// Picks max(1, round(fraction * n)) distinct seed nodes.
IndexList choose_initial_infected(std::size_t n, double fraction, std::uint64_t seed);

/// Sums per-node columns into per-region columns.
TimeSeriesPanel aggregate_by_region(const TimeSeriesPanel& panel,
                                    const std::vector<std::size_t>& region_of,
                                    std::size_t region_count);

}  // namespace cnl::graph
