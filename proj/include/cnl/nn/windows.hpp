#pragma once

#include "cnl/graph/epidemic.hpp"

namespace cnl::nn {

/// Sliding look-back samples x_{t-T+1..t} -> x_{t+h} taken inside one panel.
struct WindowSet {
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  /// One node × lookback matrix per sample.
  std::vector<Matrix> inputs;
  /// sample × node targets.
  Matrix targets;
  /// Panel row index t of each sample's last observed step.
  IndexList anchor_steps;

  std::size_t size() const { return inputs.size(); }
};

WindowSet make_windows(const graph::TimeSeriesPanel& panel, std::size_t lookback, std::size_t horizon);

}  // namespace cnl::nn
