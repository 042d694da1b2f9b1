#pragma once

#include "cnl/learning/datasets.hpp"
#include "cnl/learning/exchange.hpp"
#include "cnl/protocol/node.hpp"

#include <memory>

namespace cnl::harness {

/// K in-process CNNS nodes on loopback. Node ids are "agency-0".."agency-K−1"
/// and node i listens on base_port + i (ephemeral ports when base_port is 0).
struct ClusterSpec {
  std::size_t agencies = 2;
  std::string host = "127.0.0.1";
  std::uint16_t base_port = 0;
  /// fully_connected | by_reality | ring | star | explicit
  std::string topology = "fully_connected";
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // explicit only
  protocol::NodeOptions options;
  std::vector<protocol::TaskConfig> tasks;
  /// Dataset directory for by_reality topologies and simulated runs.
  std::string dataset;

  /// Throws protocol::ConfigError on unknown keys' values or bad shapes.
  static ClusterSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::string agency_node_id(std::size_t i);

/// Agency graph for the spec; by_reality needs the dataset.
graph::Graph topology_graph(const ClusterSpec& spec, const learning::Dataset* data = nullptr);

/// Runs every task through real nodes: announce from agency-0, wait for
/// registration everywhere, share keys, then hand each agency an exchange
/// function that calls Node::exchange_round. Agencies meet at an in-process
/// barrier before each round so slow local training does not eat into the
/// protocol timeout.
class Cluster final : public learning::ExchangeBackend {
 public:
  Cluster(const graph::Graph& agency_graph, const ClusterSpec& spec);
  ~Cluster() override;

  std::vector<learning::ExchangeFn> open_task(const protocol::TaskConfig& task) override;
  void abort() override;
  std::string name() const override { return "cnns"; }
  std::size_t agency_count() const override { return nodes_.size(); }

  protocol::Node& node(std::size_t i) { return *nodes_.at(i); }
  /// HELLO over every link; returns the number that succeeded.
  std::size_t hello_all();
  /// Simulated crash of one agency.
  void kill(std::size_t i);
  void stop();
  std::size_t link_count() const { return links_; }

 private:
  struct Barrier;

  std::vector<std::unique_ptr<protocol::Node>> nodes_;
  std::size_t links_ = 0;
  double timeout_secs_ = 30.0;
  std::vector<std::shared_ptr<Barrier>> barriers_;
  std::mutex mu_;
  bool aborted_ = false;
};

}  // namespace cnl::harness
