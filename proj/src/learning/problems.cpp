#include "cnl/learning/problems.hpp"

#include "cnl/nn/windows.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cnl::learning {

using nlohmann::json;

namespace {

graph::SplitRatios ratios_from(const json& j, const graph::SplitRatios& fallback) {
  if (!j.is_array() || j.size() != 3) return fallback;
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json ratios_json(const graph::SplitRatios& r) { return json::array({r[0], r[1], r[2]}); }

nn::OptimizerKind optimizer_from(const std::string& s) {
  if (s == "adam") return nn::OptimizerKind::adam;
  if (s == "sgd") return nn::OptimizerKind::sgd;
  throw protocol::ConfigError("unknown optimizer: " + s);
}

Matrix rows_of(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

struct View {
  graph::Graph graph;
  IndexList ids;
  std::vector<std::optional<std::size_t>> local_of;
};

View view_of(const Dataset& d, std::optional<std::size_t> agency) {
  View v;
  if (agency) {
    auto lg = graph::local_subgraph(d.graph, d.partition, *agency);
    v.graph = std::move(lg.graph);
    v.ids = std::move(lg.local_to_global);
    v.local_of = std::move(lg.global_to_local);
  } else {
    v.graph = graph::Graph(d.node_count());
    for (const auto& e : d.graph.edges()) v.graph.add_edge(e.src, e.dst, e.weight);
    v.ids.resize(d.node_count());
    std::iota(v.ids.begin(), v.ids.end(), 0);
    v.local_of.assign(v.ids.begin(), v.ids.end());
  }
  return v;
}

void require_nonempty(const Problem& p) {
  if (p.train.empty()) throw std::invalid_argument("problem: empty training split");
  if (p.val.empty()) throw std::invalid_argument("problem: empty validation split");
  if (p.test.empty()) throw std::invalid_argument("problem: empty test split");
}

void temporal_problem(Problem& p, const Dataset& d, const View& v, const LearningHyper& h) {
  if (!d.series) throw std::invalid_argument("node_regression needs series.csv");
  const auto windows = nn::make_windows(*d.series, h.lookback, h.horizon);
  const auto blocks = graph::chronological_split(d.series->steps(), h.time_split);
  p.slot_count = windows.size();
  for (std::size_t s = 0; s < windows.size(); ++s) {
    // a sample belongs to the block holding the step it predicts
    const std::size_t predicted = windows.anchor_steps[s] + h.horizon;
    Sample smp;
    smp.features = rows_of(windows.inputs[s], v.ids);
    smp.target.resize(static_cast<Eigen::Index>(v.ids.size()), 1);
    for (std::size_t i = 0; i < v.ids.size(); ++i) {
      smp.target(static_cast<Eigen::Index>(i), 0) = windows.targets(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(v.ids[i]));
    }
    smp.slot = s;
    if (predicted < blocks.train.end) {
      p.train.push_back(std::move(smp));
    } else if (predicted < blocks.val.end) {
      p.val.push_back(std::move(smp));
    } else {
      p.test.push_back(std::move(smp));
    }
  }
}

void classification_problem(Problem& p, const Dataset& d, const View& v, const LearningHyper& h,
                            std::uint64_t split_seed) {
  if (!d.graph.node_features || !d.graph.node_labels) {
    throw std::invalid_argument("node_classification needs features.csv and labels.csv");
  }
  const auto split = graph::node_split(d.node_count(), h.node_split, split_seed);
  const Matrix features = rows_of(*d.graph.node_features, v.ids);
  Matrix target(static_cast<Eigen::Index>(v.ids.size()), 1);
  for (std::size_t i = 0; i < v.ids.size(); ++i) target(static_cast<Eigen::Index>(i), 0) = (*d.graph.node_labels)[v.ids[i]];
  auto add = [&](std::vector<Sample>& out, const IndexList& global) {
    IndexList rows;
    for (auto g : global)
      if (v.local_of[g]) rows.push_back(*v.local_of[g]);
    if (rows.empty()) return;
    std::sort(rows.begin(), rows.end());
    out.push_back({features, target, std::move(rows), {}, 0});
  };
  add(p.train, split.train);
  add(p.val, split.val);
  add(p.test, split.test);
}

void edge_problem(Problem& p, const Dataset& d, const View& v, const LearningHyper& h, std::uint64_t split_seed,
                  bool centralized) {
  if (!d.graph.node_features) throw std::invalid_argument("edge_regression needs features.csv");
  const auto& edges = d.graph.edges();
  IndexList order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(h.edge_split[1] * static_cast<double>(edges.size()));
  const auto n_test = static_cast<std::size_t>(h.edge_split[2] * static_cast<double>(edges.size()));

  const Matrix features = rows_of(*d.graph.node_features, v.ids);
  graph::Graph structure(v.ids.size());
  Sample train, val, test;
  for (auto* s : {&train, &val, &test}) s->features = features;
  std::vector<double> train_t, val_t, test_t;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& e = edges[order[r]];
    const auto a = v.local_of[e.src], b = v.local_of[e.dst];
    if (!a || !b) continue;
    const bool internal = d.partition.assignment[e.src] == d.partition.assignment[e.dst];
    if (r < n_val) {
      if (!internal) continue;
      val.pairs.emplace_back(*a, *b);
      val_t.push_back(e.weight);
    } else if (r < n_val + n_test) {
      if (!internal) continue;
      test.pairs.emplace_back(*a, *b);
      test_t.push_back(e.weight);
    } else {
      if (!internal && !centralized) continue;
      train.pairs.emplace_back(*a, *b);
      train_t.push_back(e.weight);
      structure.add_edge(*a, *b);
    }
  }
  structure.sort_edges();
  p.graph = std::move(structure);
  auto finish = [](Sample& s, const std::vector<double>& t, std::vector<Sample>& out) {
    if (t.empty()) return;
    s.target = Eigen::Map<const Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
    out.push_back(std::move(s));
  };
  finish(train, train_t, p.train);
  finish(val, val_t, p.val);
  finish(test, test_t, p.test);
}

}  // namespace

LearningHyper LearningHyper::defaults(TaskKind kind) {
  LearningHyper h;
  switch (kind) {
    case TaskKind::node_regression:
      h.model = "customized_temporal";
      h.train.opt = {nn::OptimizerKind::adam, 0.005, 0.0};
      h.train.epochs = 200;
      break;
    case TaskKind::node_classification:
      h.train.opt = {nn::OptimizerKind::adam, 0.01, 5e-4};
      h.train.epochs = 500;
      h.lr_grid = {0.001, 0.005, 0.01, 0.05, 0.1};
      break;
    case TaskKind::edge_regression:
      h.train.opt = {nn::OptimizerKind::sgd, 0.003, 0.001};
      h.train.epochs = 5000;
      break;
  }
  h.integrated_epochs = h.train.epochs;
  return h;
}

LearningHyper LearningHyper::from_task(const protocol::TaskConfig& task) {
  LearningHyper h = defaults(task.kind);
  const json& j = task.hyper;
  h.dim = task.dim;
  h.model = j.value("model", task.model);
  h.task_iter = task.task_iter;
  try {
    if (j.contains("optimizer")) h.train.opt.kind = optimizer_from(j["optimizer"].get<std::string>());
    h.train.opt.lr = j.value("lr", h.train.opt.lr);
    if (j.contains("lr")) h.lr_grid.clear();
    h.train.opt.weight_decay = j.value("weight_decay", h.train.opt.weight_decay);
    h.train.epochs = j.value("epochs", h.train.epochs);
    h.train.patience = j.value("patience", h.train.patience);
    if (j.contains("lr_grid")) h.lr_grid = j["lr_grid"].get<std::vector<double>>();
    h.lookback = j.value("lookback", h.lookback);
    h.horizon = j.value("horizon", h.horizon);
    h.time_split = ratios_from(j.value("time_split", json()), h.time_split);
    h.node_split = ratios_from(j.value("node_split", json()), h.node_split);
    h.edge_split = ratios_from(j.value("edge_split", json()), h.edge_split);
    h.global_epochs = j.value("global_epochs", h.global_epochs);
    h.global_lr = j.value("global_lr", h.global_lr);
    h.exchange_mean = j.value("exchange_mean", h.exchange_mean);
    h.virtual_weight = j.value("virtual_weight", h.virtual_weight);
    h.integrated_epochs = j.value("integrated_epochs", h.train.epochs);
  } catch (const json::exception& e) {
    throw protocol::ConfigError(std::string("task hyperparameters: ") + e.what());
  }
  if (h.lookback == 0) throw protocol::ConfigError("lookback must be positive");
  return h;
}

json LearningHyper::to_json() const {
  return {{"dim", dim},
          {"model", model},
          {"optimizer", train.opt.kind == nn::OptimizerKind::adam ? "adam" : "sgd"},
          {"lr", train.opt.lr},
          {"weight_decay", train.opt.weight_decay},
          {"epochs", train.epochs},
          {"patience", train.patience},
          {"lr_grid", lr_grid},
          {"lookback", lookback},
          {"horizon", horizon},
          {"time_split", ratios_json(time_split)},
          {"node_split", ratios_json(node_split)},
          {"edge_split", ratios_json(edge_split)},
          {"task_iter", task_iter},
          {"global_epochs", global_epochs},
          {"global_lr", global_lr},
          {"exchange_mean", exchange_mean},
          {"virtual_weight", virtual_weight},
          {"integrated_epochs", integrated_epochs}};
}

const std::vector<Sample>& Problem::samples(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return train;
}

nn::ModelSpec make_model_spec(const LearningHyper& h, TaskKind kind, std::size_t input_dim, std::size_t classes) {
  nn::DecoderKind decoder = nn::DecoderKind::node_scalar;
  std::size_t out = 1;
  if (kind == TaskKind::node_classification) {
    decoder = nn::DecoderKind::class_logits;
    out = classes;
  } else if (kind == TaskKind::edge_regression) {
    decoder = nn::DecoderKind::edge_scalar;
  }
  if (h.model == "gcn") return nn::ModelSpec::gcn(input_dim, h.dim, decoder, out);
  if (h.model == "sage_mean") return nn::ModelSpec::sage_mean(input_dim, h.dim, decoder, out);
  if (h.model == "customized_temporal") {
    if (kind != TaskKind::node_regression) throw protocol::ConfigError("customized_temporal only supports node_regression");
    return nn::ModelSpec::customized_temporal(input_dim, h.dim);
  }
  throw protocol::ConfigError("unknown embedding model: " + h.model);
}

Problem make_problem(const Dataset& d, const protocol::TaskConfig& task, const LearningHyper& h,
                     std::optional<std::size_t> agency, std::uint64_t split_seed) {
  Problem p;
  p.kind = task.kind;
  View v = view_of(d, agency);
  p.global_ids = v.ids;
  std::size_t input_dim = 0, classes = 0;
  switch (task.kind) {
    case TaskKind::node_regression:
      p.graph = v.graph;
      temporal_problem(p, d, v, h);
      input_dim = h.lookback;
      break;
    case TaskKind::node_classification: {
      p.graph = v.graph;
      classification_problem(p, d, v, h, split_seed);
      input_dim = static_cast<std::size_t>(d.graph.node_features->cols());
      const auto& labels = *d.graph.node_labels;
      classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
      break;
    }
    case TaskKind::edge_regression:
      edge_problem(p, d, v, h, split_seed, !agency.has_value());
      input_dim = static_cast<std::size_t>(d.graph.node_features->cols());
      break;
  }
  require_nonempty(p);
  p.spec = make_model_spec(h, task.kind, input_dim, classes);
  return p;
}

graph::Graph build_integrated_graph(const graph::Graph& local, double weight) {
  const auto n = local.node_count();
  graph::Graph g(n + 1, local.directed());
  for (const auto& e : local.edges()) g.add_edge(e.src, e.dst, e.weight);
  for (std::size_t i = 0; i < n; ++i) g.add_edge(i, n, weight);
  g.sort_edges();
  return g;
}

Matrix agency_targets(const Problem& p) {
  if (p.kind == TaskKind::node_classification) {
    std::map<int, std::size_t> votes;
    for (const auto& s : p.train) {
      for (auto r : *s.rows) ++votes[static_cast<int>(s.target(static_cast<Eigen::Index>(r), 0))];
    }
    int best = 0;
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    Matrix t(1, 1);
    t(0, 0) = best;
    return t;
  }
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(p.slot_count), 1);
  for (const auto& s : p.train) t(static_cast<Eigen::Index>(s.slot), 0) = s.target.mean();
  return t;
}

IndexList train_slots(const Problem& p) {
  IndexList out;
  for (const auto& s : p.train) out.push_back(s.slot);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cnl::learning
