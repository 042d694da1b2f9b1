#include "cnl/learning/global_model.hpp"

#include "cnl/nn/optimizer.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cnl::learning {

GlobalModel::GlobalModel(std::size_t dim, std::size_t out_dim, nn::LossKind loss, std::uint64_t seed)
    : w_self_("global.w_self", Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      w_neigh_("global.w_neigh", Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      bias_("global.bias", Matrix::Zero(1, static_cast<Eigen::Index>(dim))),
      readout_([&] {
        std::mt19937_64 rng(seed);
        return nn::Linear(dim, out_dim, rng, "global.readout");
      }()),
      loss_(loss) {}

Matrix GlobalModel::propagate(const Matrix& xi, const Matrix& neigh) const {
  if (xi.rows() != neigh.rows() || xi.cols() != neigh.cols()) {
    throw std::invalid_argument("global model: Ξ and neighbor table differ in shape");
  }
  Matrix z = nn::matmul(xi, w_self_.value) + nn::matmul(neigh, w_neigh_.value);
  z.rowwise() += bias_.value.row(0);
  return z.cwiseMax(0.0);
}

Matrix GlobalModel::forward(const Matrix& xi, const Matrix& neigh) {
  xi_ = xi;
  neigh_ = neigh;
  pre_ = nn::matmul(xi, w_self_.value) + nn::matmul(neigh, w_neigh_.value);
  pre_.rowwise() += bias_.value.row(0);
  return readout_.forward(pre_.cwiseMax(0.0));
}

void GlobalModel::backward(const Matrix& grad_out) {
  Matrix g = readout_.backward(grad_out);
  g = g.cwiseProduct((pre_.array() > 0.0).cast<double>().matrix());
  w_self_.grad += nn::matmul_tn(xi_, g);
  w_neigh_.grad += nn::matmul_tn(neigh_, g);
  bias_.grad += g.colwise().sum();
}

std::vector<nn::Param*> GlobalModel::params() {
  return {&w_self_, &w_neigh_, &bias_, &readout_.weight(), &readout_.bias()};
}

double GlobalModel::fit(const Matrix& xi, const Matrix& neigh, const Matrix& target, const IndexList& slots,
                        std::size_t epochs, double lr) {
  if (slots.empty() || epochs == 0) return 0.0;
  nn::Optimizer opt({nn::OptimizerKind::adam, lr, 0.0}, params());
  double loss = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    opt.zero_grad();
    const Matrix out = forward(xi, neigh);
    auto l = nn::compute_loss(loss_, out, target, slots);
    if (!std::isfinite(l.value)) throw std::runtime_error("global model: non-finite loss at epoch " + std::to_string(e));
    loss = l.value;
    backward(l.grad);
    opt.step();
  }
  return loss;
}

Matrix exchange_embeddings(const Matrix& xi, int round, const ExchangeFn& exchange, bool mean, RoundRecord* record) {
  const std::vector<double> flat(xi.data(), xi.data() + xi.size());
  const auto out = exchange(round, flat);
  if (out.sum.size() != flat.size()) throw std::runtime_error("exchange returned a vector of the wrong length");
  Matrix m = Eigen::Map<const Matrix>(out.sum.data(), xi.rows(), xi.cols());
  if (mean && out.addend_count > 1) m /= static_cast<double>(out.addend_count);
  if (record != nullptr) *record = {round, out.addend_count, out.partial, out.missing};
  return m;
}

GlobalRun train_global(GlobalModel& model, const Matrix& xi0, const Matrix& targets, const IndexList& slots,
                       std::size_t rounds, const ExchangeFn& exchange, bool mean, std::size_t epochs, double lr) {
  GlobalRun run;
  run.xi = xi0;
  for (std::size_t r = 0; r < rounds; ++r) {
    RoundRecord rec;
    const Matrix neigh = exchange_embeddings(run.xi, static_cast<int>(r), exchange, mean, &rec);
    run.partial = run.partial || rec.partial;
    run.rounds.push_back(std::move(rec));
    run.losses.push_back(model.fit(run.xi, neigh, targets, slots, epochs, lr));
    run.xi = model.propagate(run.xi, neigh);
  }
  return run;
}

}  // namespace cnl::learning
