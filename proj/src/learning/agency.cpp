#include "cnl/learning/agency.hpp"

#include "cnl/nn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace cnl::learning {

namespace {

bool is_edge(const Problem& p) { return p.kind == TaskKind::edge_regression; }

double sample_loss(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, const Sample& s,
                   Matrix* grad) {
  const Matrix out = forward_sample(model, setup, s);
  auto l = nn::compute_loss(p.loss_kind(), out, s.target, is_edge(p) ? std::nullopt : s.rows);
  if (grad) {
    if (setup.virtual_rows && !is_edge(p)) {
      // the virtual node has no target
      grad->setZero(l.grad.rows() + 1, l.grad.cols());
      grad->topRows(l.grad.rows()) = l.grad;
    } else {
      *grad = std::move(l.grad);
    }
  }
  return l.value;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index c = 0;
    m.row(r).maxCoeff(&c);
    out[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ tag) ^ index);
}

ForwardSetup ForwardSetup::local(const Problem& p) {
  auto ctx = nn::GraphContext::build(p.graph);
  return {ctx, ctx, std::nullopt};
}

ForwardSetup ForwardSetup::integrated(const Problem& p, Matrix virtual_rows, double weight) {
  if (static_cast<std::size_t>(virtual_rows.rows()) != p.slot_count) {
    throw std::invalid_argument("integrated setup: one virtual row per slot expected");
  }
  return {nn::GraphContext::build(p.graph), nn::GraphContext::build(build_integrated_graph(p.graph, weight)),
          std::move(virtual_rows)};
}

Matrix forward_sample(nn::GraphModel& model, const ForwardSetup& setup, const Sample& s) {
  Vector row;
  const Vector* vrow = nullptr;
  if (setup.virtual_rows) {
    row = setup.virtual_rows->row(static_cast<Eigen::Index>(s.slot)).transpose();
    vrow = &row;
  }
  const bool edge = model.spec().decoder == nn::DecoderKind::edge_scalar;
  Matrix out = model.forward({s.features, setup.encoder, setup.head, vrow, edge ? &s.pairs : nullptr});
  if (!edge && vrow) {
    // drop the virtual node's output
    Matrix trimmed = out.topRows(out.rows() - 1);
    return trimmed;
  }
  return out;
}

double split_loss(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, Split split) {
  const auto& samples = p.samples(split);
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(model, p, setup, s, nullptr);
  return total / static_cast<double>(samples.size());
}

FitResult fit(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, const TrainConfig& cfg,
              std::uint64_t seed) {
  FitResult res;
  res.lr = cfg.opt.lr;
  res.best_val_loss = split_loss(model, p, setup, Split::val);
  if (cfg.epochs == 0) return res;
  if (!std::isfinite(res.best_val_loss)) res.best_val_loss = std::numeric_limits<double>::infinity();

  nn::Optimizer opt(cfg.opt, model.params());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(p.train.size());
  std::iota(order.begin(), order.end(), 0);
  auto best = model.state();
  Matrix grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (auto i : order) {
      model.zero_grad();
      const double l = sample_loss(model, p, setup, p.train[i], &grad);
      if (!std::isfinite(l)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      total += l;
      model.backward(grad);
      opt.step();
    }
    res.train_curve.push_back(total / static_cast<double>(order.size()));
    const double val = split_loss(model, p, setup, Split::val);
    res.val_curve.push_back(val);
    res.epochs_run = epoch + 1;
    if (val < res.best_val_loss) {
      res.best_val_loss = val;
      res.best_epoch = epoch + 1;
      best = model.state();
    } else if (cfg.patience > 0 && epoch + 1 - res.best_epoch >= cfg.patience) {
      break;
    }
  }
  model.load_state(best);
  return res;
}

std::vector<Matrix> predict(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, Split split) {
  std::vector<Matrix> out;
  for (const auto& s : p.samples(split)) {
    Matrix y = forward_sample(model, setup, s);
    if (p.kind == TaskKind::node_classification) {
      const auto ids = argmax_rows(y);
      y.resize(static_cast<Eigen::Index>(ids.size()), 1);
      for (std::size_t r = 0; r < ids.size(); ++r) y(static_cast<Eigen::Index>(r), 0) = ids[r];
    }
    out.push_back(std::move(y));
  }
  return out;
}

Matrix pool_agency(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup) {
  Matrix xi = Matrix::Zero(static_cast<Eigen::Index>(p.slot_count), static_cast<Eigen::Index>(p.spec.dim));
  std::vector<bool> done(p.slot_count, false);
  IndexList all(p.graph.node_count());
  std::iota(all.begin(), all.end(), 0);
  for (auto split : {Split::train, Split::val, Split::test}) {
    for (const auto& s : p.samples(split)) {
      if (done[s.slot]) continue;
      forward_sample(model, setup, s);
      xi.row(static_cast<Eigen::Index>(s.slot)) = nn::mean_pool(model.embedding(), all).transpose();
      done[s.slot] = true;
    }
  }
  return xi;
}

ModelRun train_model(const Problem& p, const ForwardSetup& setup, const TrainConfig& cfg,
                     const std::vector<double>& lr_grid, std::uint64_t seed, const nn::GraphModel* init) {
  const std::vector<double> rates = lr_grid.empty() ? std::vector<double>{cfg.opt.lr} : lr_grid;
  std::optional<nn::GraphModel> best;
  FitResult best_fit;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    nn::GraphModel m = init ? *init : nn::GraphModel(p.spec, seed);
    TrainConfig c = cfg;
    c.opt.lr = rates[i];
    auto f = fit(m, p, setup, c, derive_seed(seed, 17, i));
    if (!best || f.best_val_loss < best_fit.best_val_loss) {
      best = std::move(m);
      best_fit = std::move(f);
    }
  }
  ModelRun run{std::move(*best), std::move(best_fit), {}, {}};
  run.val_pred = predict(run.model, p, setup, Split::val);
  run.test_pred = predict(run.model, p, setup, Split::test);
  return run;
}

ModelRun train_local(const Problem& p, const LearningHyper& h, std::uint64_t seed) {
  return train_model(p, ForwardSetup::local(p), h.train, h.lr_grid, seed);
}

ModelRun train_integrated(const Problem& p, const LearningHyper& h, const Matrix& xi, std::uint64_t seed) {
  TrainConfig cfg = h.train;
  cfg.epochs = h.integrated_epochs;
  return train_model(p, ForwardSetup::integrated(p, xi, h.virtual_weight), cfg, h.lr_grid, seed);
}

ModelRun train_centralized(const Problem& full, const LearningHyper& h, std::uint64_t seed) {
  return train_model(full, ForwardSetup::local(full), h.train, h.lr_grid, seed);
}

void run_agency(AgencyRun& r, const Problem& p, const LearningHyper& h, std::uint64_t seed,
                const ExchangeFn* exchange) {
  const auto model_seed = derive_seed(seed, 1);
  r.local = train_local(p, h, model_seed);
  if (!exchange) return;
  r.xi_local = pool_agency(r.local->model, p, ForwardSetup::local(p));
  const std::size_t out_dim = p.kind == TaskKind::node_classification ? p.spec.output_dim : 1;
  GlobalModel global(h.dim, out_dim, p.loss_kind(), derive_seed(seed, 2));
  auto g = train_global(global, r.xi_local, agency_targets(p), train_slots(p), h.task_iter, *exchange,
                        h.exchange_mean, h.global_epochs, h.global_lr);
  r.xi_final = g.xi;
  r.rounds = std::move(g.rounds);
  r.partial = g.partial;
  r.integrated = train_integrated(p, h, r.xi_final, model_seed);
}

}  // namespace cnl::learning
