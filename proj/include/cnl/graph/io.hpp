#pragma once

#include "cnl/graph/epidemic.hpp"

#include <filesystem>
#include <string>

namespace cnl::graph {

/// Shortest round-trip decimal form of a double.
std::string format_real(double v);

/// `edges.csv`: one `src,dst[,weight]` line per edge, 0-indexed. Duplicate
/// undirected edges collapse to one; self-loops are skipped.
Graph read_edges(const std::filesystem::path& path, std::size_t node_count = 0);
void write_edges(const std::filesystem::path& path, const Graph& g);

/// `features.csv`: one comma-separated row of reals per node.
Matrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const Matrix& features);

/// `labels.csv`: one integer per line.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// `series.csv`: header row of node ids, then one row per time step.
TimeSeriesPanel read_series(const std::filesystem::path& path);
void write_series(const std::filesystem::path& path, const TimeSeriesPanel& panel);

/// `partition.json`: {"agency_count": K, "assignment": [...]}.
AgencyPartition read_partition(const std::filesystem::path& path);
void write_partition(const std::filesystem::path& path, const AgencyPartition& p);

/// LINQS citation format (Cora, CiteSeer): `<name>.content` rows are
/// `paper_id f_1 ... f_d class`, `<name>.cites` rows are `cited citing`.
/// Papers are numbered in content order and classes in order of first
/// appearance. Citations are undirected; those naming unknown papers are
/// skipped.
Graph read_linqs(const std::filesystem::path& content, const std::filesystem::path& cites);

}  // namespace cnl::graph
