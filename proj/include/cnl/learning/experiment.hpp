#pragma once

#include "cnl/learning/agency.hpp"
#include "cnl/learning/report.hpp"

namespace cnl::learning {

enum class ModelKind { local, integrated, centralized };

std::string to_string(ModelKind k);
/// Throws protocol::ConfigError for unknown names.
ModelKind model_kind_from_string(const std::string& s);

struct ExperimentConfig {
  protocol::TaskConfig task;
  std::vector<ModelKind> models{ModelKind::local, ModelKind::integrated, ModelKind::centralized};
  std::vector<std::uint64_t> seeds{0};
  /// Printed into the report header; the backend owns the actual wiring.
  graph::GlobalGraphMode global_mode = graph::GlobalGraphMode::fully_connected;
  nlohmann::json extra_header = nlohmann::json::object();
};

/// Per-seed test and validation tables for one model, kept for callers
/// that need more than the report rows.
struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;  // agency-major
  bool partial = false;
};

struct ExperimentResult {
  Report report;
  LearningHyper hyper;
  std::vector<SeedOutcome> seeds;
};

/// Trains every requested model for every seed and scores it. Local and
/// integrated models run one thread per agency; integrated models need
/// `backend`. A failed agency or model is recorded in the report and the
/// rest still runs. Task ids get a "-s<seed>" suffix per seed, and all
/// agencies start from the same initial weights for a given seed.
ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg, ExchangeBackend* backend);

/// Node- and agency-scope rows, test and validation, for one agency's model.
/// Used where a process only sees its own agency.
std::vector<ReportRow> score_agency(const Problem& p, const ModelRun& run, const std::string& model,
                                    std::size_t agency, const graph::AgencyPartition& part, std::uint64_t seed);

/// The task id used for one seed.
std::string seed_task_id(const std::string& task_id, std::uint64_t seed);

}  // namespace cnl::learning
