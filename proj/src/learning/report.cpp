#include "cnl/learning/report.hpp"

#include "cnl/graph/io.hpp"
#include "cnl/nn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cnl::learning {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string format_cell(const std::string& metric, double v) {
  const std::string base = metric.rfind("val_", 0) == 0 ? metric.substr(4) : metric;
  try {
    return nn::format_metric_value(nn::metric_from_string(base), v);
  } catch (const std::exception&) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
  }
}

// models in a fixed display order, unknown ones after
int model_rank(const std::string& m) {
  if (m == "local") return 0;
  if (m == "integrated") return 1;
  if (m == "centralized") return 2;
  return 3;
}

}  // namespace

bool higher_is_better(const std::string& metric) {
  const std::string base = metric.rfind("val_", 0) == 0 ? metric.substr(4) : metric;
  return base == "pcc" || base == "acc";
}

std::string Report::to_csv() const {
  std::string out = "model,agency,scope,metric,seed,value\n";
  for (const auto& r : rows) {
    out += r.model + ',' + r.agency + ',' + r.scope + ',' + r.metric + ',' + std::to_string(r.seed) + ',';
    if (r.value) out += graph::format_real(*r.value);
    out += '\n';
  }
  return out;
}

json Report::to_json() const {
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"model", r.model},
                  {"agency", r.agency},
                  {"scope", r.scope},
                  {"metric", r.metric},
                  {"seed", r.seed},
                  {"value", r.value ? json(*r.value) : json(nullptr)}});
  }
  return {{"header", header}, {"rows", rs}, {"partial", partial}, {"failures", failures}};
}

Report Report::from_json(const json& j) {
  Report r;
  try {
    r.header = j.value("header", json::object());
    r.partial = j.value("partial", false);
    r.failures = j.value("failures", std::vector<std::string>{});
    for (const auto& x : j.at("rows")) {
      ReportRow row;
      row.model = x.at("model").get<std::string>();
      row.agency = x.at("agency").get<std::string>();
      row.scope = x.at("scope").get<std::string>();
      row.metric = x.at("metric").get<std::string>();
      row.seed = x.at("seed").get<std::uint64_t>();
      if (!x.at("value").is_null()) row.value = x.at("value").get<double>();
      r.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  return r;
}

void Report::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.csv", to_csv());
  write_file(dir / "report.json", to_json().dump(2) + "\n");
}

std::vector<std::pair<std::uint64_t, std::optional<double>>> Report::series(const std::string& model,
                                                                            const std::string& agency,
                                                                            const std::string& scope,
                                                                            const std::string& metric) const {
  std::vector<std::pair<std::uint64_t, std::optional<double>>> out;
  for (const auto& r : rows) {
    if (r.model == model && r.agency == agency && r.scope == scope && r.metric == metric) {
      out.emplace_back(r.seed, r.value);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::string Report::render_table() const {
  using Key = std::tuple<std::string, std::string, std::string>;  // agency, scope, metric
  std::map<Key, std::map<std::string, std::pair<double, std::size_t>>> sums;
  std::set<std::string> model_set;
  for (const auto& r : rows) {
    if (r.metric.rfind("val_", 0) == 0) continue;
    model_set.insert(r.model);
    auto& cell = sums[{r.agency == "all" ? std::string("~all") : r.agency, r.scope, r.metric}][r.model];
    if (r.value && std::isfinite(*r.value)) {
      cell.first += *r.value;
      ++cell.second;
    }
  }
  std::vector<std::string> models(model_set.begin(), model_set.end());
  std::stable_sort(models.begin(), models.end(),
                   [](const auto& a, const auto& b) { return model_rank(a) < model_rank(b); });

  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-8s %-7s %-7s", "agency", "scope", "metric");
  os << buf;
  for (const auto& m : models) {
    std::snprintf(buf, sizeof(buf), " %13s", m.c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& [key, cells] : sums) {
    auto [agency, scope, metric] = key;
    if (agency == "~all") agency = "all";
    std::snprintf(buf, sizeof(buf), "%-8s %-7s %-7s", agency.c_str(), scope.c_str(), metric.c_str());
    os << buf;
    auto mean = [&](const std::string& m) -> std::optional<double> {
      auto it = cells.find(m);
      if (it == cells.end() || it->second.second == 0) return std::nullopt;
      return it->second.first / static_cast<double>(it->second.second);
    };
    const auto local = mean("local");
    for (const auto& m : models) {
      const auto v = mean(m);
      std::string cell = v ? format_cell(metric, *v) : "n/a";
      if (m == "integrated" && v && local) {
        const bool better = higher_is_better(metric) ? *v > *local : *v < *local;
        if (better) cell += "*";
      }
      std::snprintf(buf, sizeof(buf), " %13s", cell.c_str());
      os << buf;
    }
    os << '\n';
  }
  if (partial) os << "partial results\n";
  for (const auto& f : failures) os << "failure: " << f << '\n';
  return os.str();
}

}  // namespace cnl::learning
