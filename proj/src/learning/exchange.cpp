#include "cnl/learning/exchange.hpp"

#include <chrono>
#include <stdexcept>

namespace cnl::learning {

PlaintextExchange::PlaintextExchange(const graph::Graph& agency_graph, double timeout_secs)
    : neighbors_(agency_graph.node_count()), timeout_secs_(timeout_secs) {
  const auto adj = agency_graph.adjacency_list();
  for (std::size_t a = 0; a < adj.size(); ++a) {
    for (const auto& nb : adj[a]) neighbors_[a].push_back(nb.node);
  }
}

std::vector<ExchangeFn> PlaintextExchange::open_task(const protocol::TaskConfig&) {
  {
    std::lock_guard lk(mu_);
    aborted_ = false;
  }
  auto board = std::make_shared<Board>();
  std::vector<ExchangeFn> fns;
  for (std::size_t a = 0; a < neighbors_.size(); ++a) {
    fns.push_back([this, board, a](int round, const std::vector<double>& values) {
      return post(board, a, round, values);
    });
  }
  return fns;
}

void PlaintextExchange::abort() {
  std::lock_guard lk(mu_);
  aborted_ = true;
  cv_.notify_all();
}

ExchangeOutcome PlaintextExchange::post(const std::shared_ptr<Board>& board, std::size_t agency, int round,
                                        const std::vector<double>& values) {
  std::unique_lock lk(mu_);
  auto& posted = board->posted[round];
  if (!posted.emplace(agency, values).second) throw std::logic_error("agency posted twice in one round");
  cv_.notify_all();
  const bool ready = cv_.wait_for(lk, std::chrono::duration<double>(timeout_secs_), [&] {
    return aborted_ || posted.size() == neighbors_.size();
  });
  if (aborted_) throw ExchangeAborted("exchange aborted");
  if (!ready) throw ExchangeAborted("exchange round " + std::to_string(round) + " timed out");

  ExchangeOutcome out;
  out.sum.assign(values.size(), 0.0);
  for (auto nb : neighbors_[agency]) {
    const auto& v = posted.at(nb);
    if (v.size() != values.size()) throw std::invalid_argument("exchange: vector lengths differ between agencies");
    for (std::size_t i = 0; i < v.size(); ++i) out.sum[i] += v[i];
    ++out.addend_count;
  }
  if (++board->collected[round] == neighbors_.size()) {
    board->posted.erase(round);
    board->collected.erase(round);
  }
  return out;
}

}  // namespace cnl::learning
