#include "cnl/learning/experiment.hpp"

#include "cnl/nn/metrics.hpp"

#include <cmath>
#include <mutex>
#include <thread>

namespace cnl::learning {

using nlohmann::json;

namespace {

// samples × units: nodes for regression (one row per window), nodes or
// scored edges for the other kinds (a single row)
struct Table {
  Matrix pred, truth;
  IndexList unit_agency;
};

Table tabulate(const Problem& p, const std::vector<Matrix>& preds, Split split,
               const graph::AgencyPartition& part) {
  const auto& samples = p.samples(split);
  Table t;
  if (samples.empty()) return t;
  if (p.kind == TaskKind::node_regression) {
    const auto n = static_cast<Eigen::Index>(p.global_ids.size());
    t.pred.resize(static_cast<Eigen::Index>(samples.size()), n);
    t.truth.resize(t.pred.rows(), n);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      t.pred.row(static_cast<Eigen::Index>(s)) = preds[s].col(0).transpose();
      t.truth.row(static_cast<Eigen::Index>(s)) = samples[s].target.col(0).transpose();
    }
    for (auto g : p.global_ids) t.unit_agency.push_back(part.assignment[g]);
    return t;
  }
  std::vector<double> pv, tv;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& smp = samples[s];
    if (p.kind == TaskKind::node_classification) {
      for (auto r : *smp.rows) {
        pv.push_back(preds[s](static_cast<Eigen::Index>(r), 0));
        tv.push_back(smp.target(static_cast<Eigen::Index>(r), 0));
        t.unit_agency.push_back(part.assignment[p.global_ids[r]]);
      }
    } else {
      for (std::size_t e = 0; e < smp.pairs.size(); ++e) {
        pv.push_back(preds[s](static_cast<Eigen::Index>(e), 0));
        tv.push_back(smp.target(static_cast<Eigen::Index>(e), 0));
        t.unit_agency.push_back(part.assignment[p.global_ids[smp.pairs[e].first]]);
      }
    }
  }
  t.pred = Eigen::Map<const Matrix>(pv.data(), 1, static_cast<Eigen::Index>(pv.size()));
  t.truth = Eigen::Map<const Matrix>(tv.data(), 1, static_cast<Eigen::Index>(tv.size()));
  return t;
}

Table columns(const Table& t, const std::optional<std::size_t>& agency) {
  Table out;
  IndexList cols;
  for (std::size_t c = 0; c < t.unit_agency.size(); ++c) {
    if (!agency || t.unit_agency[c] == *agency) cols.push_back(c);
  }
  out.pred.resize(t.pred.rows(), static_cast<Eigen::Index>(cols.size()));
  out.truth.resize(t.truth.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.pred.col(static_cast<Eigen::Index>(i)) = t.pred.col(static_cast<Eigen::Index>(cols[i]));
    out.truth.col(static_cast<Eigen::Index>(i)) = t.truth.col(static_cast<Eigen::Index>(cols[i]));
    out.unit_agency.push_back(t.unit_agency[cols[i]]);
  }
  return out;
}

Table concat(const std::vector<Table>& parts) {
  Table out;
  Eigen::Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (p.pred.cols() == 0) continue;
    rows = p.pred.rows();
    cols += p.pred.cols();
  }
  out.pred.resize(rows, cols);
  out.truth.resize(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.pred.cols() == 0) continue;
    out.pred.middleCols(at, p.pred.cols()) = p.pred;
    out.truth.middleCols(at, p.pred.cols()) = p.truth;
    out.unit_agency.insert(out.unit_agency.end(), p.unit_agency.begin(), p.unit_agency.end());
    at += p.pred.cols();
  }
  return out;
}

std::vector<nn::MetricKind> metric_kinds(TaskKind k) {
  switch (k) {
    case TaskKind::node_regression: return {nn::MetricKind::rmse, nn::MetricKind::pcc};
    case TaskKind::node_classification: return {nn::MetricKind::acc};
    case TaskKind::edge_regression: return {nn::MetricKind::mae, nn::MetricKind::rmse};
  }
  return {};
}

std::optional<double> flat_metric(nn::MetricKind k, const Matrix& pred, const Matrix& truth) {
  if (pred.size() == 0) return std::nullopt;
  return nn::evaluate_metrics(pred, truth, {k}).at(k);
}

// mean of the per-node series metric; undefined series are left out
std::optional<double> node_metric(nn::MetricKind k, const Table& t) {
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index c = 0; c < t.pred.cols(); ++c) {
    const Matrix p = t.pred.col(c), y = t.truth.col(c);
    if (auto v = flat_metric(k, p, y); v && std::isfinite(*v)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

struct Scorer {
  TaskKind kind;
  std::string model;
  std::uint64_t seed;
  std::vector<ReportRow>* rows;

  void emit(const std::string& agency, const std::string& scope, const std::string& metric,
            std::optional<double> v) const {
    if (v && !std::isfinite(*v)) v.reset();
    rows->push_back({model, agency, scope, metric, seed, v});
  }

  void score(const Table& t, const std::string& agency, bool multi, const std::string& prefix) const {
    for (auto k : metric_kinds(kind)) {
      const std::string name = prefix + nn::to_string(k);
      if (kind == TaskKind::node_regression) {
        if (multi) {
          emit(agency, "multi", name, flat_metric(k, t.pred, t.truth));
        } else {
          emit(agency, "node", name, node_metric(k, t));
          const Matrix ps = t.pred.rowwise().sum(), ys = t.truth.rowwise().sum();
          emit(agency, "agency", name, flat_metric(k, ps, ys));
        }
      } else {
        emit(agency, multi ? "multi" : "agency", name, flat_metric(k, t.pred, t.truth));
      }
    }
  }

  // a multi-agency row over fewer than all agencies would mislead, so it is
  // left undefined when any agency is missing
  void score_all(const std::vector<Table>& per_agency, const Table& multi, const std::string& prefix,
                 bool complete = true) const {
    for (std::size_t a = 0; a < per_agency.size(); ++a) score(per_agency[a], std::to_string(a), false, prefix);
    score(complete ? multi : Table{}, "all", true, prefix);
  }
};

struct AgencySlot {
  std::optional<Problem> problem;
  std::optional<AgencyRun> run;
  std::string error;
};

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::local: return "local";
    case ModelKind::integrated: return "integrated";
    case ModelKind::centralized: return "centralized";
  }
  return "local";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "local") return ModelKind::local;
  if (s == "integrated") return ModelKind::integrated;
  if (s == "centralized") return ModelKind::centralized;
  throw protocol::ConfigError("unknown model kind: " + s);
}

std::vector<ReportRow> score_agency(const Problem& p, const ModelRun& run, const std::string& model,
                                    std::size_t agency, const graph::AgencyPartition& part, std::uint64_t seed) {
  std::vector<ReportRow> rows;
  const Scorer sc{p.kind, model, seed, &rows};
  sc.score(tabulate(p, run.test_pred, Split::test, part), std::to_string(agency), false, "");
  sc.score(tabulate(p, run.val_pred, Split::val, part), std::to_string(agency), false, "val_");
  return rows;
}

std::string seed_task_id(const std::string& task_id, std::uint64_t seed) {
  return task_id + "-s" + std::to_string(seed);
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg, ExchangeBackend* backend) {
  data.validate();
  cfg.task.validate();
  ExperimentResult result;
  result.hyper = LearningHyper::from_task(cfg.task);
  const auto& h = result.hyper;
  auto has = [&](ModelKind m) { return std::find(cfg.models.begin(), cfg.models.end(), m) != cfg.models.end(); };
  const bool want_local = has(ModelKind::local), want_int = has(ModelKind::integrated),
             want_central = has(ModelKind::centralized);
  if (want_int && !backend) throw protocol::ConfigError("integrated models need an exchange backend");
  const std::size_t K = data.partition.agency_count;
  if (want_int && backend->agency_count() != K) {
    throw protocol::ConfigError("exchange backend has " + std::to_string(backend->agency_count()) +
                                " agencies, partition has " + std::to_string(K));
  }

  Report& report = result.report;
  json models = json::array();
  for (auto m : cfg.models) models.push_back(to_string(m));
  report.header = {{"task", cfg.task.to_json()},
                   {"hyper", h.to_json()},
                   {"models", models},
                   {"seeds", cfg.seeds},
                   {"agencies", K},
                   {"nodes", data.node_count()},
                   {"global_graph", cfg.global_mode == graph::GlobalGraphMode::fully_connected ? "fully_connected"
                                                                                               : "by_reality"},
                   {"exchange", want_int ? backend->name() : "none"}};
  for (const auto& [k, v] : cfg.extra_header.items()) report.header[k] = v;

  for (auto seed : cfg.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    protocol::TaskConfig task = cfg.task;
    task.task_id = seed_task_id(cfg.task.task_id, seed);

    if (want_local || want_int) {
      std::vector<AgencySlot> slots(K);
      std::vector<ExchangeFn> fns;
      bool opened = true;
      if (want_int) {
        try {
          fns = backend->open_task(task);
        } catch (const std::exception& e) {
          report.failures.push_back("seed " + std::to_string(seed) + ": exchange setup: " + e.what());
          opened = false;
        }
      }
      std::vector<std::thread> threads;
      for (std::size_t a = 0; a < K; ++a) {
        threads.emplace_back([&, a] {
          auto& slot = slots[a];
          try {
            slot.problem = make_problem(data, task, h, a, seed);
            const ExchangeFn* fn = (want_int && opened) ? &fns[a] : nullptr;
            slot.run.emplace();
            run_agency(*slot.run, *slot.problem, h, derive_seed(seed, 100), fn);
          } catch (const std::exception& e) {
            slot.error = e.what();
            if (want_int && opened) backend->abort();
          }
        });
      }
      for (auto& t : threads) t.join();

      for (std::size_t a = 0; a < K; ++a) {
        if (!slots[a].error.empty()) {
          report.failures.push_back("seed " + std::to_string(seed) + ", agency " + std::to_string(a) + ": " +
                                    slots[a].error);
        }
        if (slots[a].run) {
          outcome.rounds.insert(outcome.rounds.end(), slots[a].run->rounds.begin(), slots[a].run->rounds.end());
          outcome.partial = outcome.partial || slots[a].run->partial;
        }
      }
      if (want_int && !opened) report.failures.push_back("seed " + std::to_string(seed) + ": integrated skipped");

      auto score_model = [&](ModelKind kind) {
        std::vector<Table> test_tables, val_tables;
        bool complete = true;
        for (std::size_t a = 0; a < K; ++a) {
          const auto& slot = slots[a];
          const std::optional<ModelRun>* run = nullptr;
          if (slot.run) run = kind == ModelKind::local ? &slot.run->local : &slot.run->integrated;
          if (!run || !*run) {
            test_tables.emplace_back();
            val_tables.emplace_back();
            complete = false;
            continue;
          }
          test_tables.push_back(tabulate(*slot.problem, (*run)->test_pred, Split::test, data.partition));
          val_tables.push_back(tabulate(*slot.problem, (*run)->val_pred, Split::val, data.partition));
        }
        Scorer sc{cfg.task.kind, to_string(kind), seed, &report.rows};
        sc.score_all(test_tables, concat(test_tables), "", complete);
        sc.score_all(val_tables, concat(val_tables), "val_", complete);
      };
      if (want_local) score_model(ModelKind::local);
      if (want_int && opened) score_model(ModelKind::integrated);
    }

    if (want_central) {
      try {
        const Problem full = make_problem(data, task, h, std::nullopt, seed);
        const auto run = train_centralized(full, h, derive_seed(seed, 200));
        auto score_split = [&](const std::vector<Matrix>& preds, Split split, const std::string& prefix) {
          const Table all = tabulate(full, preds, split, data.partition);
          std::vector<Table> per;
          for (std::size_t a = 0; a < K; ++a) per.push_back(columns(all, a));
          Scorer{cfg.task.kind, "centralized", seed, &report.rows}.score_all(per, all, prefix);
        };
        score_split(run.test_pred, Split::test, "");
        score_split(run.val_pred, Split::val, "val_");
      } catch (const std::exception& e) {
        report.failures.push_back("seed " + std::to_string(seed) + ", centralized: " + e.what());
      }
    }
    report.partial = report.partial || outcome.partial;
    result.seeds.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace cnl::learning
