#include "cnl/nn/model.hpp"

#include <stdexcept>

namespace cnl::nn {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::gcn: return "gcn";
    case LayerKind::sage_mean: return "sage_mean";
    case LayerKind::temporal_conv: return "temporal_conv";
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
  }
  return "?";
}

std::string to_string(DecoderKind k) {
  switch (k) {
    case DecoderKind::node_scalar: return "node_scalar";
    case DecoderKind::class_logits: return "class_logits";
    case DecoderKind::edge_scalar: return "edge_scalar";
  }
  return "?";
}

namespace {

std::size_t output_width(const LayerSpec& l, std::size_t in) {
  switch (l.kind) {
    case LayerKind::relu: return in;
    case LayerKind::temporal_conv: {
      std::size_t w = 0;
      for (const auto& s : l.scales) w += s.channels;
      return w;
    }
    default: return l.width;
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& l, std::size_t in, std::mt19937_64& rng,
                                  const std::string& name) {
  switch (l.kind) {
    case LayerKind::gcn: return std::make_unique<GcnLayer>(in, l.width, l.activation, rng, name);
    case LayerKind::sage_mean: return std::make_unique<SageMeanLayer>(in, l.width, rng, name);
    case LayerKind::temporal_conv: return std::make_unique<TemporalConv>(in, l.scales, rng, name);
    case LayerKind::linear: return std::make_unique<Linear>(in, l.width, rng, name);
    case LayerKind::relu: return std::make_unique<Relu>();
  }
  throw std::invalid_argument("unknown layer kind");
}

}  // namespace

void ModelSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("model spec: dim must be positive");
  if (input_dim == 0) throw std::invalid_argument("model spec: input width must be positive");
  if (encoder.empty()) throw std::invalid_argument("model spec: encoder is empty");
  std::size_t w = input_dim;
  for (const auto& l : encoder) {
    if (l.kind == LayerKind::temporal_conv) {
      if (l.scales.empty()) throw std::invalid_argument("model spec: temporal_conv without scales");
      for (const auto& s : l.scales) {
        if (s.span() > w) throw std::invalid_argument("model spec: look-back shorter than temporal receptive field");
      }
    } else if (l.kind != LayerKind::relu && l.width == 0) {
      throw std::invalid_argument("model spec: zero-width " + to_string(l.kind) + " layer");
    }
    w = output_width(l, w);
  }
  if (w != dim) {
    throw std::invalid_argument("model spec: encoder ends at width " + std::to_string(w) +
                                " but dim is " + std::to_string(dim));
  }
  for (const auto& l : head) {
    if (l.kind == LayerKind::temporal_conv) throw std::invalid_argument("model spec: temporal_conv only allowed in the encoder");
    if (l.kind != LayerKind::relu && l.width == 0) throw std::invalid_argument("model spec: zero-width head layer");
    w = output_width(l, w);
  }
  if (output_dim == 0) throw std::invalid_argument("model spec: output width must be positive");
  if (decoder == DecoderKind::class_logits && output_dim < 2) {
    throw std::invalid_argument("model spec: classification needs at least two classes");
  }
}

ModelSpec ModelSpec::gcn(std::size_t input_dim, std::size_t dim, DecoderKind decoder, std::size_t output_dim) {
  ModelSpec s;
  s.input_dim = input_dim;
  s.dim = dim;
  s.encoder = {{LayerKind::gcn, dim, Activation::relu, {}}};
  s.head = {{LayerKind::gcn, dim, Activation::relu, {}}};
  s.decoder = decoder;
  s.output_dim = output_dim;
  return s;
}

ModelSpec ModelSpec::sage_mean(std::size_t input_dim, std::size_t dim, DecoderKind decoder, std::size_t output_dim) {
  ModelSpec s;
  s.input_dim = input_dim;
  s.dim = dim;
  s.encoder = {{LayerKind::sage_mean, dim, Activation::relu, {}}};
  s.head = {{LayerKind::sage_mean, dim, Activation::relu, {}}};
  s.decoder = decoder;
  s.output_dim = output_dim;
  return s;
}

ModelSpec ModelSpec::customized_temporal(std::size_t lookback, std::size_t dim,
                                         std::vector<TemporalScale> scales) {
  ModelSpec s;
  s.input_dim = lookback;
  s.dim = dim;
  s.encoder = {{LayerKind::temporal_conv, 0, Activation::none, std::move(scales)},
               {LayerKind::linear, dim, Activation::none, {}},
               {LayerKind::relu, 0, Activation::none, {}}};
  s.head = {{LayerKind::gcn, dim, Activation::relu, {}}};
  s.decoder = DecoderKind::node_scalar;
  s.output_dim = 1;
  return s;
}

GraphModel::GraphModel(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  std::size_t w = spec_.input_dim;
  for (std::size_t i = 0; i < spec_.encoder.size(); ++i) {
    encoder_.push_back(make_layer(spec_.encoder[i], w, rng, "enc" + std::to_string(i)));
    w = output_width(spec_.encoder[i], w);
  }
  for (std::size_t i = 0; i < spec_.head.size(); ++i) {
    head_.push_back(make_layer(spec_.head[i], w, rng, "head" + std::to_string(i)));
    w = output_width(spec_.head[i], w);
  }
  if (spec_.decoder == DecoderKind::edge_scalar) {
    edge_decoder_ = std::make_unique<EdgeDecoder>(w, rng);
  } else {
    node_decoder_ = std::make_unique<Linear>(w, spec_.output_dim, rng, "decoder");
  }
  collect_params();
}

GraphModel::GraphModel(const GraphModel& other) : spec_(other.spec_) {
  for (const auto& l : other.encoder_) encoder_.push_back(l->clone());
  for (const auto& l : other.head_) head_.push_back(l->clone());
  if (other.node_decoder_) node_decoder_ = std::make_unique<Linear>(*other.node_decoder_);
  if (other.edge_decoder_) edge_decoder_ = std::make_unique<EdgeDecoder>(*other.edge_decoder_);
  embedding_ = other.embedding_;
  encoder_rows_ = other.encoder_rows_;
  had_virtual_ = other.had_virtual_;
  collect_params();
}

GraphModel& GraphModel::operator=(const GraphModel& other) {
  if (this != &other) {
    GraphModel tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void GraphModel::collect_params() {
  params_.clear();
  for (auto& l : encoder_) for (auto* p : l->params()) params_.push_back(p);
  for (auto& l : head_) for (auto* p : l->params()) params_.push_back(p);
  if (node_decoder_) for (auto* p : node_decoder_->params()) params_.push_back(p);
  if (edge_decoder_) for (auto* p : edge_decoder_->params()) params_.push_back(p);
}

Matrix GraphModel::forward(const ForwardInput& in) {
  const auto n = in.encoder_graph.node_count;
  if (static_cast<std::size_t>(in.features.rows()) != n) {
    throw std::invalid_argument("model: feature rows do not match the encoder graph");
  }
  const bool with_virtual = in.head_graph.node_count == n + 1;
  if (!with_virtual && in.head_graph.node_count != n) {
    throw std::invalid_argument("model: head graph must equal the encoder graph or add one virtual node");
  }
  if (with_virtual && (in.virtual_row == nullptr ||
                       static_cast<std::size_t>(in.virtual_row->size()) != spec_.dim)) {
    throw std::invalid_argument("model: virtual node needs a feature row of width dim");
  }

  Matrix h = in.features;
  for (auto& l : encoder_) {
    l->bind(&in.encoder_graph);
    h = l->forward(h);
  }
  embedding_ = h;
  encoder_rows_ = n;
  had_virtual_ = with_virtual;
  if (with_virtual) {
    h.conservativeResize(h.rows() + 1, Eigen::NoChange);
    h.row(h.rows() - 1) = in.virtual_row->transpose();
  }
  for (auto& l : head_) {
    l->bind(&in.head_graph);
    h = l->forward(h);
  }
  if (edge_decoder_) {
    if (in.pairs == nullptr) throw std::invalid_argument("model: edge decoder needs node pairs");
    return edge_decoder_->forward(h, *in.pairs);
  }
  return node_decoder_->forward(h);
}

void GraphModel::backward(const Matrix& grad_out) {
  Matrix g = edge_decoder_ ? edge_decoder_->backward(grad_out) : node_decoder_->backward(grad_out);
  for (auto it = head_.rbegin(); it != head_.rend(); ++it) g = (*it)->backward(g);
  if (had_virtual_) g.conservativeResize(static_cast<Eigen::Index>(encoder_rows_), Eigen::NoChange);
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) g = (*it)->backward(g);
}

std::vector<Param*> GraphModel::params() { return params_; }

void GraphModel::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

std::size_t GraphModel::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<Matrix> GraphModel::state() const {
  std::vector<Matrix> s;
  for (const auto* p : params_) s.push_back(p->value);
  return s;
}

void GraphModel::load_state(const std::vector<Matrix>& s) {
  if (s.size() != params_.size()) throw std::invalid_argument("model: state size mismatch");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].rows() != params_[i]->value.rows() || s[i].cols() != params_[i]->value.cols()) {
      throw std::invalid_argument("model: state shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = s[i];
  }
}

}  // namespace cnl::nn
