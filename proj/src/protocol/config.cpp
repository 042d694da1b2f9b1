#include "cnl/protocol/config.hpp"

#include "cnl/protocol/transport.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace cnl::protocol {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void PeerConfig::validate() const {
  if (node_id.empty()) throw ConfigError("node_id must be non-empty");
  try {
    Endpoint::parse(listen);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("listen: ") + e.what());
  }
  std::set<std::string> seen;
  for (const auto& n : neighbors) {
    if (n.id.empty()) throw ConfigError("neighbor id must be non-empty");
    if (n.id == node_id) throw ConfigError("node lists itself as a neighbor");
    if (!seen.insert(n.id).second) throw ConfigError("duplicate neighbor id " + n.id);
    try {
      Endpoint::parse(n.addr);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("neighbor " + n.id + ": " + e.what());
    }
  }
}

const NeighborConfig* PeerConfig::neighbor(const std::string& id) const {
  for (const auto& n : neighbors) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::vector<std::string> PeerConfig::neighbor_ids() const {
  std::vector<std::string> ids;
  for (const auto& n : neighbors) ids.push_back(n.id);
  return ids;
}

nlohmann::json PeerConfig::to_json() const {
  nlohmann::json ns = nlohmann::json::array();
  for (const auto& n : neighbors) ns.push_back({{"id", n.id}, {"addr", n.addr}});
  return {{"node_id", node_id}, {"listen", listen}, {"neighbors", ns},
          {"data_dir", data_dir}, {"identity_key_path", identity_key_path}};
}

PeerConfig PeerConfig::from_json(const nlohmann::json& j) {
  PeerConfig c;
  try {
    c.node_id = j.at("node_id").get<std::string>();
    c.listen = j.at("listen").get<std::string>();
    for (const auto& n : j.value("neighbors", nlohmann::json::array())) {
      c.neighbors.push_back({n.at("id").get<std::string>(), n.at("addr").get<std::string>()});
    }
    c.data_dir = j.value("data_dir", std::string());
    c.identity_key_path = j.value("identity_key_path", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("peer config: ") + e.what());
  }
  c.validate();
  return c;
}

PeerConfig PeerConfig::load(const std::string& path) { return from_json(read_json_file(path)); }

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::node_regression: return "node_regression";
    case TaskKind::node_classification: return "node_classification";
    case TaskKind::edge_regression: return "edge_regression";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "node_regression") return TaskKind::node_regression;
  if (s == "node_classification") return TaskKind::node_classification;
  if (s == "edge_regression") return TaskKind::edge_regression;
  throw ConfigError("unknown task kind: " + s);
}

void TaskConfig::validate() const {
  if (task_id.empty()) throw ConfigError("task_id must be non-empty");
  if (task_iter == 0) throw ConfigError("task_iter must be >= 1");
  if (dim == 0) throw ConfigError("dim must be > 0");
  if (he_agency_count == 0) throw ConfigError("he_agency_count must be >= 1");
  if (model != "gcn" && model != "sage_mean" && model != "customized_temporal") {
    throw ConfigError("unknown embedding model: " + model);
  }
}

nlohmann::json TaskConfig::to_json() const {
  return {{"task_id", task_id}, {"task_kind", to_string(kind)}, {"model", model},
          {"dim", dim}, {"task_iter", task_iter}, {"he_agency_count", he_agency_count},
          {"hyper", hyper}, {"dataset", dataset}};
}

TaskConfig TaskConfig::from_json(const nlohmann::json& j) {
  TaskConfig t;
  try {
    t.task_id = j.at("task_id").get<std::string>();
    t.kind = task_kind_from_string(j.value("task_kind", std::string("node_regression")));
    t.model = j.value("model", t.model);
    t.dim = j.value("dim", t.dim);
    t.task_iter = j.value("task_iter", t.task_iter);
    t.he_agency_count = j.value("he_agency_count", t.he_agency_count);
    t.hyper = j.value("hyper", nlohmann::json::object());
    t.dataset = j.value("dataset", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task config: ") + e.what());
  }
  t.validate();
  return t;
}

EnvOverrides EnvOverrides::read() {
  EnvOverrides o;
  if (const char* v = std::getenv("CNL_TIMEOUT_SECS"); v != nullptr && *v != '\0') {
    char* end = nullptr;
    const double t = std::strtod(v, &end);
    if (end == v || *end != '\0' || !(t > 0.0)) throw ConfigError("CNL_TIMEOUT_SECS must be a positive number");
    o.timeout_secs = t;
  }
  if (const char* v = std::getenv("CNL_HE_COUNT"); v != nullptr && *v != '\0') {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n <= 0) throw ConfigError("CNL_HE_COUNT must be a positive integer");
    o.he_count = static_cast<std::size_t>(n);
  }
  return o;
}

}  // namespace cnl::protocol
