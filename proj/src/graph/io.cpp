#include "cnl/graph/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cnl::graph {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

double parse_real(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::size_t parse_index(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad node id '" + s + "'");
  }
  return v;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_real failed");
  return std::string(buf, ptr);
}

Graph read_edges(const std::filesystem::path& path, std::size_t node_count) {
  auto in = open_in(path);
  std::vector<Edge> raw;
  std::size_t max_id = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 2 || cells.size() > 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected src,dst[,weight]");
    }
    Edge e{parse_index(cells[0], path, lineno), parse_index(cells[1], path, lineno), 1.0};
    if (cells.size() == 3) e.weight = parse_real(cells[2], path, lineno);
    max_id = std::max({max_id, e.src, e.dst});
    raw.push_back(e);
  }
  const std::size_t n = std::max(node_count, raw.empty() ? node_count : max_id + 1);
  Graph g(n);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : raw) {
    if (e.src == e.dst) continue;
    const auto key = std::minmax(e.src, e.dst);
    if (!seen.insert(key).second) continue;
    g.add_edge(e.src, e.dst, e.weight);
  }
  g.sort_edges();
  return g;
}

void write_edges(const std::filesystem::path& path, const Graph& g) {
  auto out = open_out(path);
  for (const auto& e : g.edges()) {
    out << e.src << ',' << e.dst;
    if (e.weight != 1.0) out << ',' << format_real(e.weight);
    out << '\n';
  }
}

Matrix read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::vector<double> row;
    for (const auto& c : split_csv(line)) row.push_back(parse_real(c, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ragged feature row");
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_features(const std::filesystem::path& path, const Matrix& features) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      if (j) out << ',';
      out << format_real(features(i, j));
    }
    out << '\n';
  }
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    int v = 0;
    const auto& s = cells.at(0);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad label '" + s + "'");
    }
    labels.push_back(v);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  auto out = open_out(path);
  for (int l : labels) out << l << '\n';
}

TimeSeriesPanel read_series(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  const auto header = split_csv(line);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::vector<double> row;
    for (const auto& c : split_csv(line)) row.push_back(parse_real(c, path, lineno));
    if (row.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": row width differs from header");
    }
    rows.push_back(std::move(row));
  }
  TimeSeriesPanel p;
  p.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      p.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
    }
  }
  p.validate();
  return p;
}

void write_series(const std::filesystem::path& path, const TimeSeriesPanel& panel) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
    if (j) out << ',';
    out << j;
  }
  out << '\n';
  for (Eigen::Index t = 0; t < panel.values.rows(); ++t) {
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
      if (j) out << ',';
      out << format_real(panel.values(t, j));
    }
    out << '\n';
  }
}

AgencyPartition read_partition(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  AgencyPartition p;
  p.agency_count = j.at("agency_count").get<std::size_t>();
  p.assignment = j.at("assignment").get<std::vector<std::size_t>>();
  p.validate(p.assignment.size());
  return p;
}

void write_partition(const std::filesystem::path& path, const AgencyPartition& p) {
  auto out = open_out(path);
  nlohmann::json j{{"agency_count", p.agency_count}, {"assignment", p.assignment}};
  out << j.dump() << '\n';
}

Graph read_linqs(const std::filesystem::path& content, const std::filesystem::path& cites) {
  auto in = open_in(content);
  std::map<std::string, std::size_t> index;
  std::map<std::string, int> classes;
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(std::move(t));
    if (tok.size() < 2) throw std::runtime_error(content.string() + ":" + std::to_string(lineno) + ": short row");
    if (!index.emplace(tok.front(), labels.size()).second) {
      throw std::runtime_error(content.string() + ":" + std::to_string(lineno) + ": duplicate paper " + tok.front());
    }
    const auto cls = classes.emplace(tok.back(), static_cast<int>(classes.size())).first->second;
    labels.push_back(cls);
    std::vector<double> f;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) f.push_back(std::stod(tok[i]));
    if (!rows.empty() && f.size() != rows.front().size()) {
      throw std::runtime_error(content.string() + ":" + std::to_string(lineno) + ": ragged feature row");
    }
    rows.push_back(std::move(f));
  }
  Graph g(labels.size());
  auto cin = open_in(cites);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (std::getline(cin, line)) {
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a >> b)) continue;
    const auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end() || ia->second == ib->second) continue;
    const auto key = std::minmax(ia->second, ib->second);
    if (seen.insert(key).second) g.add_edge(key.first, key.second);
  }
  g.sort_edges();
  if (!rows.empty() && !rows.front().empty()) {
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    g.node_features = std::move(x);
  }
  g.node_labels = std::move(labels);
  return g;
}

}  // namespace cnl::graph
