#include "cnl/graph/epidemic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cnl::graph {

void TimeSeriesPanel::validate() const {
  if (!values.allFinite()) throw std::invalid_argument("time series panel has non-finite entries");
}

namespace {

enum class State : unsigned char { S, I, R };

void check_inputs(const Graph& g, const ContagionParams& p, const IndexList& initial) {
  if (!(p.beta >= 0.0 && p.beta <= 1.0) || !(p.mu >= 0.0 && p.mu <= 1.0)) {
    throw std::invalid_argument("contagion rates must lie in [0, 1]");
  }
  if (initial.empty()) throw std::invalid_argument("initial infected set is empty");
  for (auto v : initial) {
    if (v >= g.node_count()) throw std::invalid_argument("initial infected node out of range");
  }
}

CompartmentCounts count(const std::vector<State>& s) {
  CompartmentCounts c;
  for (auto x : s) {
    switch (x) {
      case State::S: ++c.susceptible; break;
      case State::I: ++c.infected; break;
      case State::R: ++c.recovered; break;
    }
  }
  return c;
}

EpidemicTrace run(const Graph& g, const ContagionParams& p, const IndexList& initial,
                  std::uint64_t seed, bool immune_after_recovery) {
  check_inputs(g, p, initial);
  const auto n = g.node_count();
  const auto adj = g.adjacency_list();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<State> state(n, State::S);
  for (auto v : initial) state[v] = State::I;

  EpidemicTrace trace;
  trace.infected.values = Matrix::Zero(static_cast<Eigen::Index>(p.steps + 1),
                                       static_cast<Eigen::Index>(n));
  auto record = [&](std::size_t t) {
    for (std::size_t v = 0; v < n; ++v) {
      trace.infected.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v)) =
          state[v] == State::I ? 1.0 : 0.0;
    }
    trace.counts.push_back(count(state));
    if (!trace.extinct_at && trace.counts.back().infected == 0) trace.extinct_at = t;
  };
  record(0);

  std::vector<State> next(n);
  for (std::size_t t = 1; t <= p.steps; ++t) {
    if (immune_after_recovery && trace.extinct_at) {
      record(t);
      continue;
    }
    for (std::size_t v = 0; v < n; ++v) {
      next[v] = state[v];
      if (state[v] == State::S) {
        std::size_t k = 0;
        for (const auto& nb : adj[v]) k += state[nb.node] == State::I ? 1 : 0;
        if (k == 0) continue;
        const double p_inf = 1.0 - std::pow(1.0 - p.beta, static_cast<double>(k));
        if (unif(rng) < p_inf) next[v] = State::I;
      } else if (state[v] == State::I) {
        if (unif(rng) < p.mu) next[v] = immune_after_recovery ? State::R : State::S;
      }
    }
    state.swap(next);
    record(t);
  }
  return trace;
}

}  // namespace

EpidemicTrace simulate_sis(const Graph& g, const ContagionParams& params,
                           const IndexList& initial_infected, std::uint64_t seed) {
  return run(g, params, initial_infected, seed, false);
}

EpidemicTrace simulate_sir(const Graph& g, const ContagionParams& params,
                           const IndexList& initial_infected, std::uint64_t seed) {
  return run(g, params, initial_infected, seed, true);
}

IndexList choose_initial_infected(std::size_t n, double fraction, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("cannot seed an empty graph");
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
  IndexList nodes(n);
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(nodes[i], nodes[pick(rng)]);
  }
  nodes.resize(k);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

TimeSeriesPanel aggregate_by_region(const TimeSeriesPanel& panel,
                                    const std::vector<std::size_t>& region_of,
                                    std::size_t region_count) {
  if (region_of.size() != panel.series_count()) {
    throw std::invalid_argument("region map does not match panel width");
  }
  TimeSeriesPanel out;
  out.values = Matrix::Zero(panel.values.rows(), static_cast<Eigen::Index>(region_count));
  for (std::size_t v = 0; v < region_of.size(); ++v) {
    if (region_of[v] >= region_count) throw std::invalid_argument("region id out of range");
    out.values.col(static_cast<Eigen::Index>(region_of[v])) +=
        panel.values.col(static_cast<Eigen::Index>(v));
  }
  return out;
}

}  // namespace cnl::graph
