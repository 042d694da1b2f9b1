#pragma once

#include "cnl/learning/exchange.hpp"
#include "cnl/nn/layers.hpp"
#include "cnl/nn/loss.hpp"

namespace cnl::learning {

/// One agency's private global GNN. Each row of Ξ is one slot:
///   Ξ' = ReLU(Ξ·W_self + M·W_neigh + b),   X̂ = Ξ'·W_out + b_out
/// where M holds the decrypted neighbor mean. W_self and W_neigh start at the
/// identity so an untrained model adds the neighborhood to Ξ.
class GlobalModel {
 public:
  GlobalModel(std::size_t dim, std::size_t out_dim, nn::LossKind loss, std::uint64_t seed);

  Matrix propagate(const Matrix& xi, const Matrix& neigh) const;
  /// Readout of propagate(); caches what backward needs.
  Matrix forward(const Matrix& xi, const Matrix& neigh);
  void backward(const Matrix& grad_out);
  /// Full-batch steps on the rows in `slots`. Returns the last loss.
  double fit(const Matrix& xi, const Matrix& neigh, const Matrix& target, const IndexList& slots,
             std::size_t epochs, double lr);

  std::vector<nn::Param*> params();
  nn::Param& w_self() { return w_self_; }
  nn::Param& w_neigh() { return w_neigh_; }
  nn::Param& bias() { return bias_; }
  nn::LossKind loss_kind() const { return loss_; }

 private:
  nn::Param w_self_, w_neigh_, bias_;
  nn::Linear readout_;
  nn::LossKind loss_;
  Matrix xi_, neigh_, pre_;
};

struct RoundRecord {
  int round = 0;
  std::size_t addend_count = 0;
  bool partial = false;
  std::vector<std::string> missing;
};

/// Exchanges Ξ (flattened row-major) and returns the neighbor sum, or mean
/// when `mean` is set, reshaped like Ξ.
Matrix exchange_embeddings(const Matrix& xi, int round, const ExchangeFn& exchange, bool mean,
                           RoundRecord* record = nullptr);

struct GlobalRun {
  Matrix xi;  // after the last round
  std::vector<RoundRecord> rounds;
  std::vector<double> losses;
  bool partial = false;
};

/// `rounds` exchange rounds, each followed by fitting Θ on the train slots
/// and advancing Ξ one propagation step.
GlobalRun train_global(GlobalModel& model, const Matrix& xi0, const Matrix& targets, const IndexList& slots,
                       std::size_t rounds, const ExchangeFn& exchange, bool mean, std::size_t epochs,
                       double lr);

}  // namespace cnl::learning
