#include "cnl/nn/windows.hpp"

#include <stdexcept>
#include <string>

namespace cnl::nn {

WindowSet make_windows(const graph::TimeSeriesPanel& panel, std::size_t lookback, std::size_t horizon) {
  if (lookback == 0) throw std::invalid_argument("make_windows: look-back must be positive");
  const auto len = panel.steps();
  if (len < lookback + horizon) {
    throw std::invalid_argument("make_windows: panel of " + std::to_string(len) +
                                " steps is shorter than look-back + horizon = " +
                                std::to_string(lookback + horizon));
  }
  WindowSet w;
  w.lookback = lookback;
  w.horizon = horizon;
  const auto count = len - lookback - horizon + 1;
  const auto nodes = panel.values.cols();
  w.targets.resize(static_cast<Eigen::Index>(count), nodes);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t t = s + lookback - 1;
    w.inputs.push_back(panel.values
                           .middleRows(static_cast<Eigen::Index>(t + 1 - lookback),
                                       static_cast<Eigen::Index>(lookback))
                           .transpose());
    w.targets.row(static_cast<Eigen::Index>(s)) = panel.values.row(static_cast<Eigen::Index>(t + horizon));
    w.anchor_steps.push_back(t);
  }
  return w;
}

}  // namespace cnl::nn
