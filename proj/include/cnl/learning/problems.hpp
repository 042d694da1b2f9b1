#pragma once

#include "cnl/graph/split.hpp"
#include "cnl/learning/datasets.hpp"
#include "cnl/nn/loss.hpp"
#include "cnl/nn/model.hpp"
#include "cnl/nn/optimizer.hpp"
#include "cnl/protocol/config.hpp"

#include <optional>

namespace cnl::learning {

using protocol::TaskKind;

struct TrainConfig {
  nn::OptimizerConfig opt;
  std::size_t epochs = 200;
  /// Stop after this many epochs without a validation-loss improvement; 0 disables.
  std::size_t patience = 50;
};

/// Everything tunable about a learning task, with per-kind defaults. Parsed
/// from TaskConfig::hyper and echoed into reports.
struct LearningHyper {
  std::size_t dim = 16;
  std::string model = "gcn";
  TrainConfig train;
  /// Tried in turn for each model, keeping the lowest validation loss. Empty
  /// means use train.opt.lr only.
  std::vector<double> lr_grid;
  std::size_t lookback = 20;
  std::size_t horizon = 5;
  graph::SplitRatios time_split{0.5, 0.2, 0.3};
  graph::SplitRatios node_split{0.6, 0.2, 0.2};
  graph::SplitRatios edge_split{0.8, 0.1, 0.1};
  std::size_t task_iter = 1;
  std::size_t global_epochs = 200;
  double global_lr = 0.01;
  /// Divide exchanged sums by the addend count.
  bool exchange_mean = true;
  double virtual_weight = 1.0;
  std::size_t integrated_epochs = 200;

  static LearningHyper defaults(TaskKind kind);
  /// Defaults for the task kind overridden by task.hyper and task.dim/model/task_iter.
  static LearningHyper from_task(const protocol::TaskConfig& task);
  nlohmann::json to_json() const;
};

enum class Split { train, val, test };

/// One forward pass worth of data.
struct Sample {
  Matrix features;
  /// Node tasks: one row per node (class id for classification). Edge
  /// tasks: one row per pair.
  Matrix target;
  /// Nodes that count for loss and metrics; every node when unset.
  std::optional<IndexList> rows;
  nn::EdgePairs pairs;
  /// Row of the agency-embedding table this sample reads and pools into.
  std::size_t slot = 0;
};

/// Training data for one agency (or the undivided graph) under one task.
struct Problem {
  TaskKind kind = TaskKind::node_regression;
  graph::Graph graph;
  nn::ModelSpec spec;
  std::vector<Sample> train, val, test;
  std::size_t slot_count = 1;
  /// Original node id of every local node.
  IndexList global_ids;

  const std::vector<Sample>& samples(Split s) const;
  nn::LossKind loss_kind() const {
    return kind == TaskKind::node_classification ? nn::LossKind::ce : nn::LossKind::mse;
  }
};

/// Problem over agency `agency`'s local subgraph, or over the whole graph
/// when `agency` is unset. Splits are drawn once over the full dataset from
/// `split_seed` so local and centralized models are scored on the same nodes
/// and edges; edge tasks only score edges inside one agency.
Problem make_problem(const Dataset& data, const protocol::TaskConfig& task, const LearningHyper& hyper,
                     std::optional<std::size_t> agency, std::uint64_t split_seed);

nn::ModelSpec make_model_spec(const LearningHyper& hyper, TaskKind kind, std::size_t input_dim,
                              std::size_t classes);

/// Local graph plus node n connected to every local node with `weight`.
graph::Graph build_integrated_graph(const graph::Graph& local, double weight = 1.0);

/// Agency-level targets for the global model, one row per slot: the agency
/// mean of training node (or edge) targets, or the majority training label.
/// Slots without training samples stay zero.
Matrix agency_targets(const Problem& p);
/// Slots that carry training samples.
IndexList train_slots(const Problem& p);

}  // namespace cnl::learning
