#include "cnl/nn/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cnl::nn {

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::rmse: return "rmse";
    case MetricKind::pcc: return "pcc";
    case MetricKind::acc: return "acc";
    case MetricKind::mae: return "mae";
  }
  return "?";
}

MetricKind metric_from_string(const std::string& s) {
  if (s == "rmse") return MetricKind::rmse;
  if (s == "pcc") return MetricKind::pcc;
  if (s == "acc") return MetricKind::acc;
  if (s == "mae") return MetricKind::mae;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

namespace {

void check(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("metric: prediction and truth sizes differ");
  if (a.empty()) throw std::invalid_argument("metric: empty evaluation set");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check(pred, truth);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check(pred, truth);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

std::optional<double> pcc(std::span<const double> pred, std::span<const double> truth) {
  check(pred, truth);
  const auto n = static_cast<double>(pred.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= n;
  mt /= n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cov += (pred[i] - mp) * (truth[i] - mt);
    vp += (pred[i] - mp) * (pred[i] - mp);
    vt += (truth[i] - mt) * (truth[i] - mt);
  }
  if (vp <= 0.0 || vt <= 0.0) return std::nullopt;
  const double r = cov / std::sqrt(vp * vt);
  return std::clamp(r, -1.0, 1.0);
}

double accuracy(std::span<const double> pred, std::span<const double> truth) {
  check(pred, truth);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += std::lround(pred[i]) == std::lround(truth[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

MetricMap evaluate_metrics(const Matrix& pred, const Matrix& truth, const std::set<MetricKind>& kinds) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw std::invalid_argument("evaluate_metrics: shapes differ");
  }
  const std::span<const double> p(pred.data(), static_cast<std::size_t>(pred.size()));
  const std::span<const double> t(truth.data(), static_cast<std::size_t>(truth.size()));
  MetricMap out;
  for (auto k : kinds) {
    switch (k) {
      case MetricKind::rmse: out[k] = rmse(p, t); break;
      case MetricKind::mae: out[k] = mae(p, t); break;
      case MetricKind::pcc: out[k] = pcc(p, t); break;
      case MetricKind::acc: out[k] = accuracy(p, t); break;
    }
  }
  return out;
}

std::string format_metric_value(MetricKind k, double v) {
  char buf[64];
  if ((k == MetricKind::rmse || k == MetricKind::mae) && std::abs(v) >= 100.0) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  }
  return buf;
}

std::string format_metric_row(const std::vector<std::pair<MetricKind, std::optional<double>>>& row) {
  std::string out;
  for (const auto& [k, v] : row) {
    if (!out.empty()) out += " / ";
    auto name = to_string(k);
    for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    out += name + " " + (v ? format_metric_value(k, *v) : std::string("n/a"));
  }
  return out;
}

}  // namespace cnl::nn
