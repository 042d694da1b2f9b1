#pragma once

#include "cnl/nn/layers.hpp"

#include <cstdint>
#include <memory>
#include <optional>

namespace cnl::nn {

enum class LayerKind { gcn, sage_mean, temporal_conv, linear, relu };
enum class DecoderKind { node_scalar, class_logits, edge_scalar };

std::string to_string(LayerKind k);
std::string to_string(DecoderKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::gcn;
  std::size_t width = 0;                    // output width (gcn, sage_mean, linear)
  Activation activation = Activation::relu; // gcn only
  std::vector<TemporalScale> scales;        // temporal_conv only
};

/// Layer sequence split at the embedding: `encoder` produces the node
/// embeddings ξ (width `dim`), `head` runs graph layers on top of them, then a
/// decoder maps to the task output.
struct ModelSpec {
  std::size_t input_dim = 0;  // feature width, or look-back length for temporal_conv
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> head;
  std::size_t dim = 16;
  DecoderKind decoder = DecoderKind::node_scalar;
  std::size_t output_dim = 1;  // class count for class_logits

  /// Throws std::invalid_argument for incompatible widths or dim == 0.
  void validate() const;

  static ModelSpec gcn(std::size_t input_dim, std::size_t dim, DecoderKind decoder, std::size_t output_dim = 1);
  static ModelSpec sage_mean(std::size_t input_dim, std::size_t dim, DecoderKind decoder,
                             std::size_t output_dim = 1);
  /// Multiscale temporal convolution → linear+ReLU embedding → GCN → decoder.
  static ModelSpec customized_temporal(std::size_t lookback, std::size_t dim,
                                       std::vector<TemporalScale> scales = default_temporal_scales());
};

using EdgePairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Inputs for one forward pass. When `head_graph` has one node more than
/// `encoder_graph`, that extra node is the virtual node: it is appended as the
/// last row after the encoder with features `virtual_row`.
struct ForwardInput {
  const Matrix& features;
  const GraphContext& encoder_graph;
  const GraphContext& head_graph;
  const Vector* virtual_row = nullptr;
  const EdgePairs* pairs = nullptr;
};

class GraphModel {
 public:
  GraphModel(const ModelSpec& spec, std::uint64_t seed);
  GraphModel(const GraphModel& other);
  GraphModel& operator=(const GraphModel& other);
  GraphModel(GraphModel&&) noexcept = default;
  GraphModel& operator=(GraphModel&&) noexcept = default;

  /// Node decoders return one row per head-graph node; edge decoders one row
  /// per pair.
  Matrix forward(const ForwardInput& in);

  /// Backpropagates dL/d(output) of the last forward, accumulating gradients.
  /// The virtual row's gradient is dropped: it is an input, not a parameter.
  void backward(const Matrix& grad_out);

  /// Encoder output of the last forward (real nodes only).
  const Matrix& embedding() const { return embedding_; }

  std::vector<Param*> params();
  void zero_grad();
  std::size_t parameter_count();

  std::vector<Matrix> state() const;
  void load_state(const std::vector<Matrix>& s);

  const ModelSpec& spec() const { return spec_; }

 private:
  void collect_params();

  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> encoder_;
  std::vector<std::unique_ptr<Layer>> head_;
  std::unique_ptr<Linear> node_decoder_;
  std::unique_ptr<EdgeDecoder> edge_decoder_;
  std::vector<Param*> params_;

  Matrix embedding_;
  std::size_t encoder_rows_ = 0;
  bool had_virtual_ = false;
};

}  // namespace cnl::nn
