#pragma once

#include "cnl/graph/epidemic.hpp"

#include <array>
#include <cstdint>

namespace cnl::graph {

using SplitRatios = std::array<double, 3>;

/// Half-open row ranges [begin, end) into a time series.
struct TimeBlock {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct ChronoSplit {
  TimeBlock train, val, test;
};

/// Contiguous train/val/test blocks with boundaries floor(r0*T) and
/// floor((r0+r1)*T). Throws if any block is shorter than `min_block`.
ChronoSplit chronological_split(std::size_t total_steps, SplitRatios ratios = {0.5, 0.2, 0.3},
                                std::size_t min_block = 1);

TimeSeriesPanel slice(const TimeSeriesPanel& panel, TimeBlock block);

struct IndexSplit {
  IndexList train, val, test;
};

/// Uniform random disjoint cover of [0, n). Validation and test sizes are
/// floor(r*n); the remainder goes to training. Each list is sorted.
IndexSplit node_split(std::size_t n, SplitRatios ratios = {0.6, 0.2, 0.2}, std::uint64_t seed = 0);

}  // namespace cnl::graph
