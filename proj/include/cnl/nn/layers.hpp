#pragma once

#include "cnl/nn/matrix_ops.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace cnl::nn {

/// Trainable tensor with its gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// uniform(-s, s), s = sqrt(6 / (fan_in + fan_out))
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64& rng);

enum class Activation { none, relu };

/// Layers cache whatever backward needs during forward. backward() receives
/// dL/d(output), accumulates parameter gradients and returns dL/d(input).
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x) = 0;
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  /// Graph layers propagate over this context; others ignore it.
  virtual void bind(const GraphContext* /*ctx*/) {}
};

class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name = "linear");
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "linear"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  Param weight_, bias_;
  Matrix input_;
};

class Relu final : public Layer {
 public:
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::string kind() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Matrix input_;
};

/// σ(Â·H·W + b)
class GcnLayer final : public Layer {
 public:
  GcnLayer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng,
           std::string name = "gcn");
  Matrix forward(const Matrix& h) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "gcn"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GcnLayer>(*this); }
  void bind(const GraphContext* ctx) override { ctx_ = ctx; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  Param weight_, bias_;
  Activation act_;
  const GraphContext* ctx_ = nullptr;
  Matrix propagated_, pre_;
};

/// ReLU(H·W_self + mean_neighbors(H)·W_neigh + b), full neighborhoods.
class SageMeanLayer final : public Layer {
 public:
  SageMeanLayer(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name = "sage");
  Matrix forward(const Matrix& h) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param*> params() override { return {&w_self_, &w_neigh_, &bias_}; }
  std::string kind() const override { return "sage_mean"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SageMeanLayer>(*this); }
  void bind(const GraphContext* ctx) override { ctx_ = ctx; }

  Param& w_self() { return w_self_; }
  Param& w_neigh() { return w_neigh_; }

 private:
  Param w_self_, w_neigh_, bias_;
  const GraphContext* ctx_ = nullptr;
  Matrix input_, neigh_, pre_;
};

struct TemporalScale {
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  std::size_t channels = 8;

  std::size_t span() const { return (kernel - 1) * dilation + 1; }
};

std::vector<TemporalScale> default_temporal_scales();

/// Multiscale causal dilated 1-D convolutions over each row (one node's
/// look-back window), each followed by ReLU and a max over time. Output width
/// is the total channel count regardless of window length.
class TemporalConv final : public Layer {
 public:
  TemporalConv(std::size_t window, std::vector<TemporalScale> scales, std::mt19937_64& rng,
               std::string name = "tconv");
  Matrix forward(const Matrix& windows) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Param*> params() override;
  std::string kind() const override { return "temporal_conv"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<TemporalConv>(*this); }

  std::size_t output_width() const;
  const std::vector<TemporalScale>& scales() const { return scales_; }
  /// Filters for one scale: channels × kernel; tap j reads x[t - j·dilation].
  Param& filters(std::size_t scale) { return filters_[scale]; }
  Param& biases(std::size_t scale) { return biases_[scale]; }
  /// Time index selected by the max-pool for (node, output column).
  const std::vector<std::size_t>& argmax() const { return argmax_; }

 private:
  std::size_t window_;
  std::vector<TemporalScale> scales_;
  std::vector<Param> filters_, biases_;
  Matrix input_;
  Matrix pooled_pre_;  // pre-activation value at the argmax
  std::vector<std::size_t> argmax_;
};

/// Scores an edge from the concatenated endpoint embeddings: [h_u, h_v]·w + b.
class EdgeDecoder {
 public:
  EdgeDecoder(std::size_t dim, std::mt19937_64& rng);
  Matrix forward(const Matrix& h, const std::vector<std::pair<std::size_t, std::size_t>>& pairs);
  Matrix backward(const Matrix& grad_out);
  std::vector<Param*> params() { return {&weight_, &bias_}; }

 private:
  Param weight_, bias_;
  Matrix h_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

/// σ(Â·H·W) using a dense normalized adjacency.
Matrix gcn_forward(const Matrix& a_hat, const Matrix& h, const Param& w, Activation act);

Matrix sage_mean_forward(const graph::Graph& g, const Matrix& h, const Param& w_self,
                         const Param& w_neigh);

/// Standalone multiscale temporal convolution over one window (column
/// vector), returning the pooled feature vector.
Vector temporal_conv_forward(const Vector& window, const std::vector<Param>& filters,
                             const std::vector<std::size_t>& dilations);

/// Mean of the selected rows, summed in increasing row order.
Vector mean_pool(const Matrix& h, IndexList rows);

}  // namespace cnl::nn
