#pragma once

#include "cnl/nn/layers.hpp"

#include <functional>

namespace cnl::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares the gradients already stored in `params` against central finite
/// differences of `loss`. Error per entry is |g_a - g_fd| / max(1, |g_fd|).
/// `stride` > 1 samples every stride-th entry of each parameter.
GradCheckResult check_gradients(const std::function<double()>& loss, const std::vector<Param*>& params,
                                double step = 1e-5, std::size_t stride = 1);

}  // namespace cnl::nn
