#pragma once

#include "cnl/harness/cluster.hpp"
#include "cnl/learning/experiment.hpp"

#include <filesystem>
#include <iosfwd>

namespace cnl::harness {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_runtime = 2, exit_partial = 3 };

/// "0..4", "1,3,7" or a single seed. Throws protocol::ConfigError.
std::vector<std::uint64_t> parse_seeds(const std::string& s);
/// Comma-separated model kinds.
std::vector<learning::ModelKind> parse_models(const std::string& s);

/// A dataset directory (relative to `base`) or {"recipe": name, ...params}.
learning::Dataset resolve_dataset(const nlohmann::json& spec, const std::filesystem::path& base = {});

/// Configuration of `cnl run`:
///   {"dataset": dir | {"recipe", ...}, "task": {...}, "models": [...],
///    "seeds": [...] | "0..4", "exchange": "cnns" | "plaintext",
///    "cluster": {...cluster spec keys...}, "out": dir}
struct RunConfig {
  nlohmann::json dataset;
  protocol::TaskConfig task;
  std::vector<learning::ModelKind> models{learning::ModelKind::local, learning::ModelKind::integrated,
                                          learning::ModelKind::centralized};
  std::vector<std::uint64_t> seeds{0};
  std::string exchange = "cnns";
  ClusterSpec cluster;
  std::filesystem::path out = ".";
  std::filesystem::path base;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static RunConfig load(const std::filesystem::path& path);
};

/// Builds the dataset and exchange backend and runs the experiment. The
/// cluster (if any) lives only for the duration of the call.
learning::ExperimentResult execute_run(const RunConfig& cfg);

/// Exit code for a finished report: ok, partial, or runtime failure when no
/// row has a value.
int report_exit_code(const learning::Report& r);

int cmd_gen_data(const std::string& recipe, const std::filesystem::path& out, const nlohmann::json& overrides,
                 std::ostream& out_stream);
int cmd_keygen(const std::filesystem::path& out, int bits, bool paillier, bool force, std::ostream& out_stream);
/// Serves one node until SIGINT/SIGTERM or `hold_secs` (negative: forever).
int cmd_serve(const std::filesystem::path& config, const std::filesystem::path& announce, double hold_secs,
              std::ostream& out_stream);
int cmd_simulate(const std::filesystem::path& spec, const std::filesystem::path& out, double hold_secs,
                 std::ostream& out_stream);
int cmd_run(const std::filesystem::path& config, const std::string& models, const std::string& seeds,
            const std::filesystem::path& out, std::ostream& out_stream);
int cmd_report(const std::filesystem::path& in, const std::string& format, std::ostream& out_stream);

/// Installs SIGINT/SIGTERM handlers that set the stop flag.
void install_signal_handlers();
bool stop_requested();

}  // namespace cnl::harness
