#pragma once

#include "cnl/graph/graph.hpp"
#include "cnl/protocol/config.hpp"

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace cnl::learning {

/// What one agency learns from a global exchange round: the sum of its
/// neighbors' vectors and how many vectors went into it.
struct ExchangeOutcome {
  std::vector<double> sum;
  std::size_t addend_count = 0;
  bool partial = false;
  std::vector<std::string> missing;
};

/// Called by one agency once per round with its flattened embedding table.
/// Blocks until the round completes for that agency.
using ExchangeFn = std::function<ExchangeOutcome(int round, const std::vector<double>& values)>;

struct ExchangeAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ExchangeBackend {
 public:
  virtual ~ExchangeBackend() = default;
  /// Prepares `task` across all agencies and returns one function per agency.
  virtual std::vector<ExchangeFn> open_task(const protocol::TaskConfig& task) = 0;
  /// Releases agencies blocked in a round after another agency failed.
  virtual void abort() {}
  virtual std::string name() const = 0;
  virtual std::size_t agency_count() const = 0;
};

/// In-process exchange over the agency graph with no encryption. Each round
/// waits until every agency has posted, then hands each one the sum of its
/// neighbors' vectors in increasing neighbor order. Serves as the oracle for
/// the encrypted path.
class PlaintextExchange final : public ExchangeBackend {
 public:
  explicit PlaintextExchange(const graph::Graph& agency_graph, double timeout_secs = 600.0);
  std::vector<ExchangeFn> open_task(const protocol::TaskConfig& task) override;
  void abort() override;
  std::string name() const override { return "plaintext"; }
  std::size_t agency_count() const override { return neighbors_.size(); }

 private:
  struct Board {
    std::map<int, std::map<std::size_t, std::vector<double>>> posted;
    std::map<int, std::size_t> collected;
  };
  ExchangeOutcome post(const std::shared_ptr<Board>& board, std::size_t agency, int round,
                       const std::vector<double>& values);

  std::vector<std::vector<std::size_t>> neighbors_;
  double timeout_secs_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool aborted_ = false;
};

}  // namespace cnl::learning
