#include "cnl/nn/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace cnl::nn {

GradCheckResult check_gradients(const std::function<double()>& loss, const std::vector<Param*>& params,
                                double step, std::size_t stride) {
  if (step <= 0.0) throw std::invalid_argument("grad check: step must be positive");
  if (stride == 0) stride = 1;
  GradCheckResult r;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); i += static_cast<Eigen::Index>(stride)) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("grad check: non-finite loss at " + p->name);
      }
      const double fd = (up - down) / (2.0 * step);
      const double ga = p->grad.data()[i];
      const double err = std::abs(ga - fd) / std::max(1.0, std::abs(fd));
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_param = p->name;
        r.worst_index = static_cast<std::size_t>(i);
      }
    }
  }
  return r;
}

}  // namespace cnl::nn
