#include "cnl/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cnl::nn {

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

namespace {

void check_cols(const Matrix& x, Eigen::Index expected, const char* who) {
  if (x.cols() != expected) {
    throw std::invalid_argument(std::string(who) + ": input has " + std::to_string(x.cols()) +
                                " columns, expected " + std::to_string(expected));
  }
}

void add_bias(Matrix& m, const Matrix& bias) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) += bias.row(0);
}

Matrix column_sums(const Matrix& g) {
  Matrix out = Matrix::Zero(1, g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) out.row(0) += g.row(i);
  return out;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& grad) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

const GraphContext& require(const GraphContext* ctx, const Matrix& h, const char* who) {
  if (ctx == nullptr) throw std::logic_error(std::string(who) + ": no graph bound");
  if (static_cast<std::size_t>(h.rows()) != ctx->node_count) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(h.rows()) +
                                " rows for a graph of " + std::to_string(ctx->node_count) + " nodes");
  }
  return *ctx;
}

}  // namespace

// ---- Linear ----

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name)
    : weight_(name + ".weight", glorot_uniform(static_cast<Eigen::Index>(in),
                                               static_cast<Eigen::Index>(out), in, out, rng)),
      bias_(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out))) {}

Matrix Linear::forward(const Matrix& x) {
  check_cols(x, weight_.value.rows(), "linear");
  input_ = x;
  Matrix y = matmul(x, weight_.value);
  add_bias(y, bias_.value);
  return y;
}

Matrix Linear::backward(const Matrix& grad_out) {
  weight_.grad += matmul_tn(input_, grad_out);
  bias_.grad += column_sums(grad_out);
  return matmul_nt(grad_out, weight_.value);
}

// ---- Relu ----

Matrix Relu::forward(const Matrix& x) {
  input_ = x;
  return relu(x);
}

Matrix Relu::backward(const Matrix& grad_out) { return relu_mask(input_, grad_out); }

// ---- GCN ----

GcnLayer::GcnLayer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng,
                   std::string name)
    : weight_(name + ".weight", glorot_uniform(static_cast<Eigen::Index>(in),
                                               static_cast<Eigen::Index>(out), in, out, rng)),
      bias_(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out))),
      act_(act) {}

Matrix GcnLayer::forward(const Matrix& h) {
  const auto& ctx = require(ctx_, h, "gcn");
  check_cols(h, weight_.value.rows(), "gcn");
  propagated_ = ctx.gcn.apply(h);
  pre_ = matmul(propagated_, weight_.value);
  add_bias(pre_, bias_.value);
  return act_ == Activation::relu ? relu(pre_) : pre_;
}

Matrix GcnLayer::backward(const Matrix& grad_out) {
  const Matrix dz = act_ == Activation::relu ? relu_mask(pre_, grad_out) : grad_out;
  weight_.grad += matmul_tn(propagated_, dz);
  bias_.grad += column_sums(dz);
  return ctx_->gcn_t.apply(matmul_nt(dz, weight_.value));
}

// ---- GraphSAGE (mean) ----

SageMeanLayer::SageMeanLayer(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name)
    : w_self_(name + ".w_self", glorot_uniform(static_cast<Eigen::Index>(in),
                                               static_cast<Eigen::Index>(out), in, out, rng)),
      w_neigh_(name + ".w_neigh", glorot_uniform(static_cast<Eigen::Index>(in),
                                                 static_cast<Eigen::Index>(out), in, out, rng)),
      bias_(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out))) {}

Matrix SageMeanLayer::forward(const Matrix& h) {
  const auto& ctx = require(ctx_, h, "sage_mean");
  check_cols(h, w_self_.value.rows(), "sage_mean");
  input_ = h;
  neigh_ = ctx.mean.apply(h);
  pre_ = matmul(h, w_self_.value) + matmul(neigh_, w_neigh_.value);
  add_bias(pre_, bias_.value);
  return relu(pre_);
}

Matrix SageMeanLayer::backward(const Matrix& grad_out) {
  const Matrix dz = relu_mask(pre_, grad_out);
  w_self_.grad += matmul_tn(input_, dz);
  w_neigh_.grad += matmul_tn(neigh_, dz);
  bias_.grad += column_sums(dz);
  return matmul_nt(dz, w_self_.value) + ctx_->mean_t.apply(matmul_nt(dz, w_neigh_.value));
}

// ---- Edge decoder ----

EdgeDecoder::EdgeDecoder(std::size_t dim, std::mt19937_64& rng)
    : weight_("edge.weight", glorot_uniform(static_cast<Eigen::Index>(2 * dim), 1, 2 * dim, 1, rng)),
      bias_("edge.bias", Matrix::Zero(1, 1)) {}

Matrix EdgeDecoder::forward(const Matrix& h,
                            const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (weight_.value.rows() != 2 * h.cols()) throw std::invalid_argument("edge decoder: width mismatch");
  h_ = h;
  pairs_ = pairs;
  const auto d = h.cols();
  Matrix out(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [u, v] = pairs[e];
    if (u >= static_cast<std::size_t>(h.rows()) || v >= static_cast<std::size_t>(h.rows())) {
      throw std::out_of_range("edge decoder: endpoint out of range");
    }
    double acc = bias_.value(0, 0);
    for (Eigen::Index c = 0; c < d; ++c) acc += h(static_cast<Eigen::Index>(u), c) * weight_.value(c, 0);
    for (Eigen::Index c = 0; c < d; ++c) acc += h(static_cast<Eigen::Index>(v), c) * weight_.value(d + c, 0);
    out(static_cast<Eigen::Index>(e), 0) = acc;
  }
  return out;
}

Matrix EdgeDecoder::backward(const Matrix& grad_out) {
  const auto d = h_.cols();
  Matrix dh = Matrix::Zero(h_.rows(), d);
  for (std::size_t e = 0; e < pairs_.size(); ++e) {
    const auto [u, v] = pairs_[e];
    const double g = grad_out(static_cast<Eigen::Index>(e), 0);
    bias_.grad(0, 0) += g;
    for (Eigen::Index c = 0; c < d; ++c) {
      weight_.grad(c, 0) += g * h_(static_cast<Eigen::Index>(u), c);
      weight_.grad(d + c, 0) += g * h_(static_cast<Eigen::Index>(v), c);
      dh(static_cast<Eigen::Index>(u), c) += g * weight_.value(c, 0);
      dh(static_cast<Eigen::Index>(v), c) += g * weight_.value(d + c, 0);
    }
  }
  return dh;
}

// ---- free functions ----

Matrix gcn_forward(const Matrix& a_hat, const Matrix& h, const Param& w, Activation act) {
  if (a_hat.rows() != a_hat.cols() || a_hat.cols() != h.rows() || h.cols() != w.value.rows()) {
    throw std::invalid_argument("gcn_forward: shape mismatch");
  }
  Matrix z = matmul(matmul(a_hat, h), w.value);
  return act == Activation::relu ? relu(z) : z;
}

Matrix sage_mean_forward(const graph::Graph& g, const Matrix& h, const Param& w_self,
                         const Param& w_neigh) {
  if (static_cast<std::size_t>(h.rows()) != g.node_count() || h.cols() != w_self.value.rows() ||
      w_self.value.rows() != w_neigh.value.rows() || w_self.value.cols() != w_neigh.value.cols()) {
    throw std::invalid_argument("sage_mean_forward: shape mismatch");
  }
  const auto ctx = GraphContext::build(g);
  return relu(matmul(h, w_self.value) + matmul(ctx.mean.apply(h), w_neigh.value));
}

Vector mean_pool(const Matrix& h, IndexList rows) {
  if (rows.empty()) throw std::invalid_argument("mean_pool: empty row set");
  std::sort(rows.begin(), rows.end());
  Vector acc = Vector::Zero(h.cols());
  for (auto r : rows) {
    if (r >= static_cast<std::size_t>(h.rows())) throw std::out_of_range("mean_pool: row out of range");
    for (Eigen::Index c = 0; c < h.cols(); ++c) acc(c) += h(static_cast<Eigen::Index>(r), c);
  }
  return acc / static_cast<double>(rows.size());
}

}  // namespace cnl::nn
