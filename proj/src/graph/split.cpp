#include "cnl/graph/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace cnl::graph {

namespace {

void check_ratios(const SplitRatios& r) {
  for (double x : r) {
    if (!(x >= 0.0)) throw std::invalid_argument("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
}

std::size_t floor_count(double x) {
  // absorbs representation error such as 0.7 * 100 = 69.999...
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

}  // namespace

ChronoSplit chronological_split(std::size_t total_steps, SplitRatios ratios, std::size_t min_block) {
  check_ratios(ratios);
  const auto t = static_cast<double>(total_steps);
  const auto b1 = std::min(total_steps, floor_count(ratios[0] * t));
  const auto b2 = std::min(total_steps, std::max(b1, floor_count((ratios[0] + ratios[1]) * t)));
  ChronoSplit s{{0, b1}, {b1, b2}, {b2, total_steps}};
  const std::size_t need = std::max<std::size_t>(min_block, 1);
  for (const auto* block : {&s.train, &s.val, &s.test}) {
    if (block->size() < need) {
      throw std::invalid_argument("chronological split leaves a block with " +
                                  std::to_string(block->size()) + " steps (need " +
                                  std::to_string(need) + ")");
    }
  }
  return s;
}

TimeSeriesPanel slice(const TimeSeriesPanel& panel, TimeBlock block) {
  if (block.end > panel.steps() || block.begin > block.end) {
    throw std::out_of_range("time block outside panel");
  }
  return TimeSeriesPanel{panel.values.middleRows(static_cast<Eigen::Index>(block.begin),
                                                 static_cast<Eigen::Index>(block.size()))};
}

IndexSplit node_split(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
  check_ratios(ratios);
  const auto n_val = floor_count(ratios[1] * static_cast<double>(n));
  const auto n_test = floor_count(ratios[2] * static_cast<double>(n));
  if (n_val + n_test >= n || (ratios[1] > 0 && n_val == 0) || (ratios[2] > 0 && n_test == 0) ||
      ratios[1] == 0 || ratios[2] == 0) {
    throw std::invalid_argument("node split leaves an empty subset");
  }
  IndexList order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  IndexSplit s;
  s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  for (auto* l : {&s.train, &s.val, &s.test}) std::sort(l->begin(), l->end());
  return s;
}

}  // namespace cnl::graph
