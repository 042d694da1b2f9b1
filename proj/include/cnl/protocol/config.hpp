#pragma once

#include "json.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnl::protocol {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NeighborConfig {
  std::string id;
  std::string addr;
};

/// {"node_id","listen","neighbors":[{"id","addr"}],"data_dir","identity_key_path"}
struct PeerConfig {
  std::string node_id;
  std::string listen;
  std::vector<NeighborConfig> neighbors;
  std::string data_dir;
  std::string identity_key_path;

  /// Throws ConfigError: empty id, bad address, duplicate or self neighbor.
  void validate() const;
  const NeighborConfig* neighbor(const std::string& id) const;
  std::vector<std::string> neighbor_ids() const;

  nlohmann::json to_json() const;
  static PeerConfig from_json(const nlohmann::json& j);
  static PeerConfig load(const std::string& path);
};

enum class TaskKind { node_regression, node_classification, edge_regression };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct TaskConfig {
  std::string task_id;
  TaskKind kind = TaskKind::node_regression;
  std::string model = "gcn";  // gcn | sage_mean | customized_temporal
  std::size_t dim = 16;
  std::size_t task_iter = 1;
  std::size_t he_agency_count = 1;
  nlohmann::json hyper = nlohmann::json::object();
  std::string dataset;

  /// Throws ConfigError when task_iter, dim or he_agency_count is zero, or the
  /// model name is unknown.
  void validate() const;
  nlohmann::json to_json() const;
  static TaskConfig from_json(const nlohmann::json& j);
};

/// Values of CNL_TIMEOUT_SECS and CNL_HE_COUNT. Throws ConfigError on
/// unparseable or non-positive values.
struct EnvOverrides {
  std::optional<double> timeout_secs;
  std::optional<std::size_t> he_count;

  static EnvOverrides read();
};

nlohmann::json read_json_file(const std::string& path);

}  // namespace cnl::protocol
