#pragma once

#include "cnl/core/dense.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

namespace cnl::nn {

enum class MetricKind { rmse, pcc, acc, mae };

std::string to_string(MetricKind k);
MetricKind metric_from_string(const std::string& s);

double rmse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);
/// Undefined (nullopt) when either series has zero variance.
std::optional<double> pcc(std::span<const double> pred, std::span<const double> truth);
/// Fraction of positions where the rounded values agree (class-id panels).
double accuracy(std::span<const double> pred, std::span<const double> truth);

using MetricMap = std::map<MetricKind, std::optional<double>>;

/// Metrics over the flattened panels. Scope selection is the caller's job.
MetricMap evaluate_metrics(const Matrix& pred, const Matrix& truth, const std::set<MetricKind>& kinds);

/// Fixed-width rendering used by report tables, e.g. "RMSE 896 / PCC 0.779".
std::string format_metric_value(MetricKind k, double v);
std::string format_metric_row(const std::vector<std::pair<MetricKind, std::optional<double>>>& row);

}  // namespace cnl::nn
