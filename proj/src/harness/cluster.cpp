#include "cnl/harness/cluster.hpp"

#include "cnl/protocol/transport.hpp"

#include <algorithm>
#include <condition_variable>
#include <thread>

namespace cnl::harness {

using nlohmann::json;
using protocol::ConfigError;

struct Cluster::Barrier {
  std::mutex mu;
  std::condition_variable cv;
  std::map<int, std::size_t> arrived;
  std::size_t parties = 0;
  bool released = false;

  // false when the wait timed out
  bool arrive(int round, std::chrono::duration<double> limit) {
    std::unique_lock lock(mu);
    const std::size_t count = ++arrived[round];
    if (count >= parties) {
      cv.notify_all();
      return true;
    }
    return cv.wait_for(lock, limit, [&] { return released || arrived[round] >= parties; });
  }
  bool aborted() {
    std::lock_guard lock(mu);
    return released;
  }
  void release() {
    std::lock_guard lock(mu);
    released = true;
    cv.notify_all();
  }
};

std::string agency_node_id(std::size_t i) { return "agency-" + std::to_string(i); }

ClusterSpec ClusterSpec::from_json(const json& j) {
  ClusterSpec s;
  try {
    s.agencies = j.value("agencies", s.agencies);
    s.host = j.value("host", s.host);
    s.base_port = j.value("base_port", s.base_port);
    s.topology = j.value("topology", s.topology);
    if (j.contains("edges")) {
      for (const auto& e : j["edges"]) s.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    s.options.timeout_secs = j.value("timeout_secs", s.options.timeout_secs);
    if (j.contains("he_count")) s.options.he_count = j["he_count"].get<std::size_t>();
    s.options.paillier_bits = j.value("paillier_bits", s.options.paillier_bits);
    s.options.test_keys = j.value("test_keys", false);
    s.options.seed = j.value("seed", std::uint64_t{0});
    s.options.multi_submit = j.value("multi_submit", false);
    if (j.contains("tasks")) {
      for (const auto& t : j["tasks"]) s.tasks.push_back(protocol::TaskConfig::from_json(t));
    }
    s.dataset = j.value("dataset", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cluster spec: ") + e.what());
  }
  if (s.agencies == 0) throw ConfigError("cluster spec: agencies must be positive");
  if (s.base_port != 0 && s.base_port + s.agencies > 65536) throw ConfigError("cluster spec: ports run past 65535");
  if (s.topology != "fully_connected" && s.topology != "by_reality" && s.topology != "ring" && s.topology != "star" &&
      s.topology != "explicit") {
    throw ConfigError("cluster spec: unknown topology " + s.topology);
  }
  for (auto [a, b] : s.edges) {
    if (a >= s.agencies || b >= s.agencies || a == b) throw ConfigError("cluster spec: bad edge");
  }
  if (s.topology == "by_reality" && s.dataset.empty()) throw ConfigError("cluster spec: by_reality needs a dataset");
  return s;
}

json ClusterSpec::to_json() const {
  json edges_json = json::array();
  for (auto [a, b] : edges) edges_json.push_back({a, b});
  json tasks_json = json::array();
  for (const auto& t : tasks) tasks_json.push_back(t.to_json());
  json j = {{"agencies", agencies},
            {"host", host},
            {"base_port", base_port},
            {"topology", topology},
            {"edges", edges_json},
            {"timeout_secs", options.timeout_secs},
            {"paillier_bits", options.paillier_bits},
            {"test_keys", options.test_keys},
            {"seed", options.seed},
            {"multi_submit", options.multi_submit},
            {"tasks", tasks_json},
            {"dataset", dataset}};
  if (options.he_count) j["he_count"] = *options.he_count;
  return j;
}

graph::Graph topology_graph(const ClusterSpec& spec, const learning::Dataset* data) {
  const std::size_t k = spec.agencies;
  graph::Graph g(k);
  if (spec.topology == "fully_connected") {
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) g.add_edge(a, b);
  } else if (spec.topology == "ring") {
    if (k == 2) g.add_edge(0, 1);
    if (k > 2)
      for (std::size_t a = 0; a < k; ++a) g.add_edge(a, (a + 1) % k);
  } else if (spec.topology == "star") {
    for (std::size_t a = 1; a < k; ++a) g.add_edge(0, a);
  } else if (spec.topology == "explicit") {
    for (auto [a, b] : spec.edges) g.add_edge(a, b);
  } else {
    if (!data) throw ConfigError("by_reality topology needs the dataset");
    if (data->partition.agency_count != k) throw ConfigError("dataset partition does not match the agency count");
    return graph::build_global_graph(data->partition, graph::GlobalGraphMode::by_reality, &data->graph);
  }
  g.sort_edges();
  return g;
}

Cluster::Cluster(const graph::Graph& agency_graph, const ClusterSpec& spec) : timeout_secs_(spec.options.timeout_secs) {
  const std::size_t k = agency_graph.node_count();
  if (k != spec.agencies) throw ConfigError("agency graph and spec disagree on the agency count");
  std::vector<std::string> addr(k);
  {
    // hold every probe listener until all ports are known so none repeat
    std::vector<std::unique_ptr<protocol::Listener>> probes;
    for (std::size_t i = 0; i < k; ++i) {
      if (spec.base_port != 0) {
        addr[i] = spec.host + ":" + std::to_string(spec.base_port + i);
      } else {
        probes.push_back(std::make_unique<protocol::Listener>(protocol::Endpoint::parse(spec.host + ":0")));
        addr[i] = spec.host + ":" + std::to_string(probes.back()->port());
      }
    }
  }
  std::vector<protocol::PeerConfig> cfg(k);
  for (std::size_t i = 0; i < k; ++i) {
    cfg[i].node_id = agency_node_id(i);
    cfg[i].listen = addr[i];
  }
  for (const auto& e : agency_graph.edges()) {
    if (e.src == e.dst) continue;
    cfg[e.src].neighbors.push_back({cfg[e.dst].node_id, addr[e.dst]});
    cfg[e.dst].neighbors.push_back({cfg[e.src].node_id, addr[e.src]});
    ++links_;
  }
  try {
    for (std::size_t i = 0; i < k; ++i) {
      protocol::NodeOptions o = spec.options;
      o.seed = spec.options.seed + i;
      nodes_.push_back(std::make_unique<protocol::Node>(cfg[i], o));
      nodes_.back()->start();
    }
  } catch (...) {
    stop();
    throw;
  }
}

Cluster::~Cluster() { stop(); }

void Cluster::stop() {
  abort();
  for (auto& n : nodes_) n->stop();
}

void Cluster::kill(std::size_t i) { nodes_.at(i)->kill(); }

std::size_t Cluster::hello_all() {
  std::size_t ok = 0;
  for (auto& n : nodes_) ok += n->hello_all();
  return ok;
}

void Cluster::abort() {
  std::lock_guard lock(mu_);
  aborted_ = true;
  for (auto& b : barriers_) b->release();
}

std::vector<learning::ExchangeFn> Cluster::open_task(const protocol::TaskConfig& task) {
  task.validate();
  {
    std::lock_guard lock(mu_);
    aborted_ = false;
  }
  std::size_t first = 0;
  while (first < nodes_.size() && !nodes_[first]->running()) ++first;
  if (first == nodes_.size()) throw std::runtime_error("no running agency to announce from");
  nodes_[first]->announce_task(task);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_secs_);
  for (auto& n : nodes_) {
    if (!n->running()) continue;
    while (!n->has_task(task.task_id)) {
      if (std::chrono::steady_clock::now() > deadline) {
        throw std::runtime_error("task " + task.task_id + " did not reach " + n->id());
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  for (auto& n : nodes_) {
    if (n->running()) n->share_public_key(task.task_id);
  }

  auto barrier = std::make_shared<Barrier>();
  barrier->parties = static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n->running(); }));
  {
    std::lock_guard lock(mu_);
    barriers_.push_back(barrier);
  }
  std::vector<learning::ExchangeFn> fns;
  for (auto& n : nodes_) {
    protocol::Node* node = n.get();
    const std::string id = task.task_id;
    const double limit = timeout_secs_;
    fns.push_back([node, id, barrier, limit](int round, const std::vector<double>& values) {
      barrier->arrive(round, std::chrono::duration<double>(limit));
      if (barrier->aborted()) throw learning::ExchangeAborted("task " + id + " aborted");
      auto r = node->exchange_round(id, round, values);
      return learning::ExchangeOutcome{std::move(r.sum), r.addend_count, r.partial, std::move(r.missing_agencies)};
    });
  }
  return fns;
}

}  // namespace cnl::harness
