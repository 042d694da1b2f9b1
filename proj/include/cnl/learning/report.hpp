#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cnl::learning {

/// One metric value. `agency` is the agency index or "all" for multi-agency
/// rows; an empty value means undefined (e.g. PCC of a constant series).
struct ReportRow {
  std::string model;
  std::string agency;
  std::string scope;
  std::string metric;
  std::uint64_t seed = 0;
  std::optional<double> value;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  nlohmann::json header = nlohmann::json::object();
  std::vector<ReportRow> rows;
  bool partial = false;
  std::vector<std::string> failures;

  /// Header line plus one line per row, values in shortest round-trip form.
  std::string to_csv() const;
  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  /// report.csv and report.json under `dir`.
  void write(const std::filesystem::path& dir) const;

  /// Test metrics averaged over seeds, one line per (agency, scope, metric)
  /// and one column per model. Integrated means that beat local get a "*".
  std::string render_table() const;

  /// Values of one (model, agency, scope, metric) ordered by seed.
  std::vector<std::pair<std::uint64_t, std::optional<double>>> series(const std::string& model,
                                                                      const std::string& agency,
                                                                      const std::string& scope,
                                                                      const std::string& metric) const;
};

/// Whether a larger value of `metric` is better (pcc, acc and their val_ forms).
bool higher_is_better(const std::string& metric);

}  // namespace cnl::learning
