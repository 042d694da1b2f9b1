#include "cnl/nn/layers.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace cnl::nn {

std::vector<TemporalScale> default_temporal_scales() { return {{3, 1, 8}, {3, 2, 8}, {5, 1, 8}}; }

TemporalConv::TemporalConv(std::size_t window, std::vector<TemporalScale> scales,
                           std::mt19937_64& rng, std::string name)
    : window_(window), scales_(std::move(scales)) {
  if (scales_.empty()) throw std::invalid_argument("temporal_conv: no scales");
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    const auto& sc = scales_[s];
    if (sc.kernel == 0 || sc.dilation == 0 || sc.channels == 0) {
      throw std::invalid_argument("temporal_conv: kernel, dilation and channels must be positive");
    }
    if (sc.span() > window_) {
      throw std::invalid_argument("temporal_conv: window of " + std::to_string(window_) +
                                  " is shorter than receptive field " + std::to_string(sc.span()));
    }
    const auto tag = name + "." + std::to_string(s);
    filters_.emplace_back(tag + ".filters",
                          glorot_uniform(static_cast<Eigen::Index>(sc.channels),
                                         static_cast<Eigen::Index>(sc.kernel), sc.kernel, sc.channels, rng));
    biases_.emplace_back(tag + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(sc.channels)));
  }
}

std::vector<Param*> TemporalConv::params() {
  std::vector<Param*> out;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    out.push_back(&filters_[s]);
    out.push_back(&biases_[s]);
  }
  return out;
}

std::size_t TemporalConv::output_width() const {
  return std::accumulate(scales_.begin(), scales_.end(), std::size_t{0},
                         [](std::size_t acc, const TemporalScale& s) { return acc + s.channels; });
}

Matrix TemporalConv::forward(const Matrix& windows) {
  if (static_cast<std::size_t>(windows.cols()) != window_) {
    throw std::invalid_argument("temporal_conv: window length " + std::to_string(windows.cols()) +
                                " differs from configured " + std::to_string(window_));
  }
  input_ = windows;
  const auto nodes = windows.rows();
  const auto width = static_cast<Eigen::Index>(output_width());
  Matrix out(nodes, width);
  pooled_pre_.resize(nodes, width);
  argmax_.assign(static_cast<std::size_t>(nodes * width), 0);

  Eigen::Index col = 0;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    const auto& sc = scales_[s];
    const auto& w = filters_[s].value;
    const auto& b = biases_[s].value;
    const std::size_t first = sc.span() - 1;
    for (std::size_t c = 0; c < sc.channels; ++c, ++col) {
      for (Eigen::Index n = 0; n < nodes; ++n) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_t = first;
        for (std::size_t t = first; t < window_; ++t) {
          double z = b(0, static_cast<Eigen::Index>(c));
          for (std::size_t j = 0; j < sc.kernel; ++j) {
            z += w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) *
                 windows(n, static_cast<Eigen::Index>(t - j * sc.dilation));
          }
          if (z > best) {
            best = z;
            best_t = t;
          }
        }
        pooled_pre_(n, col) = best;
        argmax_[static_cast<std::size_t>(n * width + col)] = best_t;
        out(n, col) = best > 0.0 ? best : 0.0;
      }
    }
  }
  return out;
}

Matrix TemporalConv::backward(const Matrix& grad_out) {
  const auto nodes = input_.rows();
  const auto width = static_cast<Eigen::Index>(output_width());
  Matrix dx = Matrix::Zero(nodes, input_.cols());
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    const auto& sc = scales_[s];
    auto& w = filters_[s];
    auto& b = biases_[s];
    for (std::size_t c = 0; c < sc.channels; ++c, ++col) {
      for (Eigen::Index n = 0; n < nodes; ++n) {
        if (!(pooled_pre_(n, col) > 0.0)) continue;
        const double g = grad_out(n, col);
        const auto t = argmax_[static_cast<std::size_t>(n * width + col)];
        b.grad(0, static_cast<Eigen::Index>(c)) += g;
        for (std::size_t j = 0; j < sc.kernel; ++j) {
          const auto src = static_cast<Eigen::Index>(t - j * sc.dilation);
          w.grad(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) += g * input_(n, src);
          dx(n, src) += g * w.value(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
        }
      }
    }
  }
  return dx;
}

Vector temporal_conv_forward(const Vector& window, const std::vector<Param>& filters,
                             const std::vector<std::size_t>& dilations) {
  if (filters.size() != dilations.size()) {
    throw std::invalid_argument("temporal_conv_forward: one dilation per filter bank required");
  }
  std::vector<Eigen::Index> widths;
  Eigen::Index total = 0;
  for (std::size_t s = 0; s < filters.size(); ++s) {
    const auto kernel = static_cast<std::size_t>(filters[s].value.cols());
    if (kernel == 0 || dilations[s] == 0) throw std::invalid_argument("temporal_conv_forward: empty filter");
    if ((kernel - 1) * dilations[s] + 1 > static_cast<std::size_t>(window.size())) {
      throw std::invalid_argument("temporal_conv_forward: window shorter than receptive field");
    }
    total += filters[s].value.rows();
  }
  Vector out(total);
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < filters.size(); ++s) {
    const auto& w = filters[s].value;
    const auto kernel = static_cast<std::size_t>(w.cols());
    const std::size_t first = (kernel - 1) * dilations[s];
    for (Eigen::Index c = 0; c < w.rows(); ++c, ++col) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t t = first; t < static_cast<std::size_t>(window.size()); ++t) {
        double z = 0.0;
        for (std::size_t j = 0; j < kernel; ++j) {
          z += w(c, static_cast<Eigen::Index>(j)) * window(static_cast<Eigen::Index>(t - j * dilations[s]));
        }
        best = std::max(best, z);
      }
      out(col) = std::max(best, 0.0);
    }
  }
  return out;
}

}  // namespace cnl::nn
