#include "cnl/learning/experiment.hpp"

#include "cnl/crypto/codec.hpp"
#include "cnl/crypto/paillier.hpp"
#include "cnl/crypto/secure_sum.hpp"
#include "cnl/graph/generators.hpp"
#include "cnl/nn/grad_check.hpp"
#include "cnl/nn/windows.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace cnl;
using namespace cnl::learning;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cnl_learning_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

protocol::TaskConfig classify_task(std::size_t dim = 8) {
  protocol::TaskConfig t;
  t.task_id = "t";
  t.kind = TaskKind::node_classification;
  t.model = "gcn";
  t.dim = dim;
  return t;
}

// Six nodes in one agency, two classes told apart by the sign of feature 0.
Dataset separable_toy() {
  Dataset d;
  d.graph = graph::Graph(6);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {3, 4}, {4, 5}, {2, 3}}) d.graph.add_edge(a, b);
  d.graph.sort_edges();
  Matrix x(6, 2);
  x << 1.0, 0.3, 0.8, -0.2, 1.2, 0.1, -1.0, 0.2, -0.7, -0.4, -1.1, 0.0;
  d.graph.node_features = x;
  d.graph.node_labels = std::vector<int>{1, 1, 1, 0, 0, 0};
  d.partition.agency_count = 1;
  d.partition.assignment.assign(6, 0);
  return d;
}

// 60 nodes in 3 agencies.
Dataset small_multi_agency(std::uint64_t seed) {
  auto p = RecipeParams::defaults(Recipe::toy_classify);
  p.n = 60;
  p.agencies = 3;
  p.seed = seed;
  return generate_dataset(Recipe::toy_classify, p);
}

Problem problem_for(const Dataset& d, const protocol::TaskConfig& t, std::optional<std::size_t> agency,
                    LearningHyper h, std::uint64_t split_seed = 0) {
  return make_problem(d, t, h, agency, split_seed);
}

}  // namespace

TEST(Pool, SingleNodeAgencyIsItsEmbedding) {
  std::mt19937_64 rng(1);
  const Matrix h = random_matrix(1, 5, rng);
  EXPECT_EQ(nn::mean_pool(h, {0}), h.row(0).transpose());
}

TEST(Pool, IdenticalRowsGiveThatRow) {
  Matrix h(4, 3);
  for (int r = 0; r < 4; ++r) h.row(r) << 0.25, -1.5, 3.0;
  const Vector pooled = nn::mean_pool(h, {0, 1, 2, 3});
  EXPECT_EQ(pooled, h.row(0).transpose());
}

TEST(Pool, ThreeKnownRows) {
  Matrix h(3, 2);
  h << 1.0, 2.0, 4.0, -2.0, 7.0, 3.0;
  const Vector pooled = nn::mean_pool(h, {2, 0, 1});
  EXPECT_DOUBLE_EQ(pooled(0), 4.0);
  EXPECT_DOUBLE_EQ(pooled(1), 1.0);
}

TEST(Pool, AgencyTableMatchesMeanOfEmbeddings) {
  const auto d = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 4;
  const auto p = problem_for(d, classify_task(4), 0, h);
  nn::GraphModel m(p.spec, 3);
  const auto setup = ForwardSetup::local(p);
  const Matrix xi = pool_agency(m, p, setup);
  ASSERT_EQ(xi.rows(), 1);
  forward_sample(m, setup, p.train[0]);
  const Matrix& emb = m.embedding();
  for (Eigen::Index c = 0; c < 4; ++c) EXPECT_NEAR(xi(0, c), emb.col(c).mean(), 1e-12);
}

TEST(IntegratedGraph, AddsOneVirtualNodeOfDegreeN) {
  const auto local = graph::generate_er(12, 20, 4);
  const auto g = build_integrated_graph(local, 1.0);
  EXPECT_EQ(g.node_count(), 13u);
  EXPECT_EQ(g.degrees()[12], 12u);
  EXPECT_EQ(g.edge_count(), local.edge_count() + 12);
}

TEST(IntegratedGraph, RestrictionRecoversLocalAdjacency) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto local = graph::generate_er(15, 30, seed);
    const auto g = build_integrated_graph(local, 1.0);
    graph::Graph restricted(15);
    for (const auto& e : g.edges())
      if (e.src < 15 && e.dst < 15) restricted.add_edge(e.src, e.dst, e.weight);
    restricted.sort_edges();
    graph::Graph sorted_local = local;
    sorted_local.sort_edges();
    EXPECT_EQ(restricted.edges(), sorted_local.edges());
  }
}

TEST(IntegratedGraph, VirtualFeatureRowIsXiBitwise) {
  const auto d = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 4;
  const auto p = problem_for(d, classify_task(4), 0, h);
  std::mt19937_64 rng(9);
  const Matrix xi = random_matrix(1, 4, rng);
  const auto setup = ForwardSetup::integrated(p, xi, 1.0);
  ASSERT_TRUE(setup.virtual_rows);
  EXPECT_EQ(*setup.virtual_rows, xi);
  EXPECT_EQ(setup.head.node_count, 7u);
}

TEST(IntegratedGraph, VirtualIsolationIsBitwise) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = small_multi_agency(seed);
    auto h = LearningHyper::defaults(TaskKind::node_classification);
    h.dim = 6;
    const auto p = problem_for(d, classify_task(6), seed % 3, h, seed);
    nn::GraphModel model(p.spec, seed);
    const auto local = ForwardSetup::local(p);
    const auto zeroed = ForwardSetup::integrated(p, Matrix::Zero(1, 6), 0.0);
    for (const auto& s : p.train) {
      const Matrix a = forward_sample(model, local, s);
      const Matrix b = forward_sample(model, zeroed, s);
      ASSERT_EQ(a.rows(), b.rows());
      EXPECT_TRUE((a.array() == b.array()).all()) << "seed " << seed;
    }
  }
}

TEST(IntegratedGraph, VirtualNodeChangesOutputsWhenWired) {
  const auto d = small_multi_agency(2);
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 6;
  const auto p = problem_for(d, classify_task(6), 0, h);
  nn::GraphModel model(p.spec, 5);
  const Matrix a = forward_sample(model, ForwardSetup::local(p), p.train[0]);
  const Matrix b = forward_sample(model, ForwardSetup::integrated(p, Matrix::Constant(1, 6, 2.0), 1.0), p.train[0]);
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LossMasking, VirtualTargetNeverReachesGradients) {
  const auto d = small_multi_agency(4);
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 6;
  const auto p = problem_for(d, classify_task(6), 1, h);
  const auto setup = ForwardSetup::integrated(p, Matrix::Constant(1, 6, 0.5), 1.0);
  const auto& s = p.train[0];
  IndexList real(static_cast<std::size_t>(s.features.rows()));
  std::iota(real.begin(), real.end(), 0);
  auto grads_with = [&](double virtual_target) {
    nn::GraphModel m(p.spec, 11);
    Vector row = setup.virtual_rows->row(0).transpose();
    const Matrix out = m.forward({s.features, setup.encoder, setup.head, &row, nullptr});
    Matrix target(out.rows(), 1);
    target.topRows(s.target.rows()) = s.target;
    target(out.rows() - 1, 0) = virtual_target;
    m.zero_grad();
    m.backward(nn::compute_loss(nn::LossKind::ce, out, target, real).grad);
    std::vector<Matrix> g;
    for (auto* prm : m.params()) g.push_back(prm->grad);
    return g;
  };
  const auto a = grads_with(0.0);
  const auto b = grads_with(1.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE((a[i].array() == b[i].array()).all());
}

TEST(GlobalModel, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    GlobalModel gm(4, 2, nn::LossKind::mse, seed);
    for (auto* prm : gm.params()) prm->value = random_matrix(prm->value.rows(), prm->value.cols(), rng, 0.8);
    const Matrix xi = random_matrix(5, 4, rng), neigh = random_matrix(5, 4, rng), y = random_matrix(5, 2, rng);
    for (auto* prm : gm.params()) prm->zero_grad();
    gm.backward(nn::mse_loss(gm.forward(xi, neigh), y).grad);
    auto loss = [&] { return nn::mse_loss(gm.forward(xi, neigh), y).value; };
    EXPECT_LT(nn::check_gradients(loss, gm.params()).max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(GlobalModel, IdentitySelfZeroNeighborKeepsXiUpToRelu) {
  std::mt19937_64 rng(3);
  GlobalModel gm(5, 1, nn::LossKind::mse, 0);
  gm.w_neigh().value.setZero();
  const Matrix xi = random_matrix(3, 5, rng), neigh = random_matrix(3, 5, rng);
  EXPECT_EQ(gm.propagate(xi, neigh), xi.cwiseMax(0.0));
}

TEST(GlobalModel, ZeroNeighborsIsSelfTransformOnly) {
  std::mt19937_64 rng(4);
  GlobalModel gm(4, 1, nn::LossKind::mse, 0);
  gm.w_self().value = random_matrix(4, 4, rng);
  const Matrix xi = random_matrix(2, 4, rng);
  auto none = [](int, const std::vector<double>& v) {
    return ExchangeOutcome{std::vector<double>(v.size(), 0.0), 0, false, {}};
  };
  RoundRecord rec;
  const Matrix m = exchange_embeddings(xi, 0, none, true, &rec);
  EXPECT_EQ(rec.addend_count, 0u);
  EXPECT_EQ(gm.propagate(xi, m), nn::matmul(xi, gm.w_self().value).cwiseMax(0.0));
}

TEST(GlobalModel, ThreeNeighborsThroughPaillierMatchPlaintext) {
  auto rs = crypto::RandomSource::seeded(77);
  const auto kp = crypto::paillier_keygen(512, rs, crypto::KeyMode::test);
  const crypto::FixedPointCodec codec(kp.pub.n);
  std::mt19937_64 rng(12);
  const Matrix xi = random_matrix(3, 4, rng, 10.0);
  std::vector<Matrix> neighbors;
  for (int i = 0; i < 3; ++i) neighbors.push_back(random_matrix(3, 4, rng, 10.0));

  auto encrypted = [&](int, const std::vector<double>&) {
    std::vector<crypto::CiphertextVector> parts;
    for (const auto& n : neighbors) {
      std::vector<double> flat(n.data(), n.data() + n.size());
      parts.push_back(crypto::encrypt_vector(kp.pub, codec, flat, rs));
    }
    const auto sum = crypto::secure_sum(kp.pub, parts);
    return ExchangeOutcome{crypto::decrypt_vector(kp.pub, kp.priv, codec, sum), sum.addend_count, false, {}};
  };
  GlobalModel gm(4, 1, nn::LossKind::mse, 0);
  const Matrix updated = gm.propagate(xi, exchange_embeddings(xi, 0, encrypted, true));
  const Matrix oracle = (xi + (neighbors[0] + neighbors[1] + neighbors[2]) / 3.0).cwiseMax(0.0);
  EXPECT_LE((updated - oracle).cwiseAbs().maxCoeff(), 4.0 * std::ldexp(1.0, -21));
}

TEST(GlobalModel, ConstantTargetsAreFitExactly) {
  std::mt19937_64 rng(8);
  GlobalModel gm(3, 1, nn::LossKind::mse, 2);
  const Matrix xi = random_matrix(6, 3, rng), neigh = random_matrix(6, 3, rng);
  const Matrix y = Matrix::Constant(6, 1, 1.7);
  IndexList all{0, 1, 2, 3, 4, 5};
  const double loss = gm.fit(xi, neigh, y, all, 3000, 0.01);
  EXPECT_LT(loss, 1e-6);
}

TEST(GlobalModel, TaskIterOneRunsOneRound) {
  std::size_t calls = 0;
  auto echo = [&](int, const std::vector<double>& v) {
    ++calls;
    return ExchangeOutcome{v, 1, false, {}};
  };
  GlobalModel gm(2, 1, nn::LossKind::mse, 0);
  const Matrix xi = Matrix::Ones(1, 2);
  auto run = train_global(gm, xi, Matrix::Ones(1, 1), {0}, 1, echo, true, 5, 0.01);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(run.rounds.size(), 1u);
}

TEST(GlobalModel, FiveAgencyRoundChangesEveryXi) {
  const std::size_t K = 5;
  const auto agency_graph = graph::build_global_graph(
      graph::AgencyPartition{K, {0, 1, 2, 3, 4}}, graph::GlobalGraphMode::fully_connected);
  PlaintextExchange ex(agency_graph, 30.0);
  protocol::TaskConfig t = classify_task(3);
  const auto fns = ex.open_task(t);
  std::vector<Matrix> before(K), after(K);
  std::vector<std::thread> threads;
  for (std::size_t a = 0; a < K; ++a) {
    threads.emplace_back([&, a] {
      std::mt19937_64 rng(a + 1);
      before[a] = random_matrix(1, 3, rng).cwiseAbs();
      GlobalModel gm(3, 1, nn::LossKind::mse, a);
      auto run = train_global(gm, before[a], Matrix::Ones(1, 1), {0}, 1, fns[a], true, 0, 0.01);
      after[a] = run.xi;
    });
  }
  for (auto& th : threads) th.join();
  for (std::size_t a = 0; a < K; ++a) EXPECT_GT((after[a] - before[a]).cwiseAbs().maxCoeff(), 1e-9) << a;
}

TEST(Training, SeparableToyReachesPerfectTrainAccuracy) {
  const auto d = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 4;
  h.train.epochs = 200;
  h.train.patience = 0;
  h.lr_grid.clear();
  h.node_split = {0.5, 0.25, 0.25};
  const auto p = problem_for(d, classify_task(4), 0, h, 1);
  auto run = train_local(p, h, 0);
  const auto pred = predict(run.model, p, ForwardSetup::local(p), Split::train);
  for (auto r : *p.train[0].rows) EXPECT_EQ(pred[0](static_cast<Eigen::Index>(r), 0), p.train[0].target(static_cast<Eigen::Index>(r), 0));
}

TEST(Training, ZeroEpochsKeepsInitialModel) {
  const auto d = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 4;
  h.train.epochs = 0;
  h.lr_grid.clear();
  h.node_split = {0.5, 0.25, 0.25};
  const auto p = problem_for(d, classify_task(4), 0, h);
  auto run = train_local(p, h, 7);
  nn::GraphModel fresh(p.spec, 7);
  EXPECT_EQ(run.model.state(), fresh.state());
  EXPECT_EQ(run.fit.epochs_run, 0u);
}

TEST(Training, SameSeedSameCurve) {
  const auto d = small_multi_agency(1);
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 6;
  h.train.epochs = 40;
  h.lr_grid = {0.01, 0.05};
  const auto p = problem_for(d, classify_task(6), 2, h);
  const auto a = train_local(p, h, 3), b = train_local(p, h, 3);
  EXPECT_EQ(a.fit.train_curve, b.fit.train_curve);
  EXPECT_EQ(a.fit.val_curve, b.fit.val_curve);
  EXPECT_EQ(a.test_pred, b.test_pred);
}

TEST(Training, EarlyStoppingRestoresBestValidationState) {
  const auto d = small_multi_agency(3);
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 6;
  h.train.epochs = 300;
  h.train.patience = 5;
  h.train.opt.lr = 0.1;
  const auto p = problem_for(d, classify_task(6), 0, h);
  nn::GraphModel m(p.spec, 1);
  const auto setup = ForwardSetup::local(p);
  const auto f = fit(m, p, setup, h.train, 1);
  EXPECT_LE(f.epochs_run, f.best_epoch + 5);
  EXPECT_DOUBLE_EQ(split_loss(m, p, setup, Split::val), f.best_val_loss);
}

TEST(Training, DivergenceThrows) {
  const auto d = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 4;
  h.node_split = {0.5, 0.25, 0.25};
  auto p = problem_for(d, classify_task(4), 0, h);
  p.train[0].features(0, 0) = std::nan("");
  nn::GraphModel m(p.spec, 0);
  EXPECT_THROW(fit(m, p, ForwardSetup::local(p), h.train, 0), TrainingError);
}

TEST(Training, SingleAgencyCentralizedEqualsLocal) {
  auto d = small_multi_agency(6);
  d.partition.agency_count = 1;
  d.partition.assignment.assign(d.node_count(), 0);
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.dim = 6;
  h.train.epochs = 30;
  const auto local = problem_for(d, classify_task(6), 0, h, 4);
  const auto full = problem_for(d, classify_task(6), std::nullopt, h, 4);
  const auto a = train_local(local, h, 9), b = train_centralized(full, h, 9);
  EXPECT_EQ(a.fit.train_curve, b.fit.train_curve);
  EXPECT_EQ(a.test_pred, b.test_pred);
}

TEST(Training, EdgeRegressionLearnsRatings) {
  auto rp = RecipeParams::defaults(Recipe::toy_bipartite);
  rp.n = 60;
  rp.agencies = 2;
  const auto d = generate_dataset(Recipe::toy_bipartite, rp);
  protocol::TaskConfig t;
  t.kind = TaskKind::edge_regression;
  t.dim = 8;
  auto h = LearningHyper::from_task(t);
  h.train.epochs = 300;
  const auto p = problem_for(d, t, std::nullopt, h, 0);
  auto run = train_centralized(p, h, 0);
  const double first = run.fit.train_curve.front();
  EXPECT_LT(run.fit.train_curve.back(), first);
}

TEST(Problems, WindowsGoToTheBlockOfTheirPredictedStep) {
  auto rp = RecipeParams::defaults(Recipe::er_sis);
  rp.n = 40;
  rp.m = 100;
  rp.agencies = 2;
  const auto d = generate_dataset(Recipe::er_sis, rp);
  protocol::TaskConfig t;
  t.kind = TaskKind::node_regression;
  t.model = "customized_temporal";
  const auto h = LearningHyper::from_task(t);
  const auto p = problem_for(d, t, 0, h);
  const auto blocks = graph::chronological_split(d.series->steps(), h.time_split);
  const auto windows = nn::make_windows(*d.series, h.lookback, h.horizon);
  for (const auto& s : p.train) EXPECT_LT(windows.anchor_steps[s.slot] + h.horizon, blocks.train.end);
  for (const auto& s : p.val) {
    EXPECT_GE(windows.anchor_steps[s.slot] + h.horizon, blocks.val.begin);
    EXPECT_LT(windows.anchor_steps[s.slot] + h.horizon, blocks.val.end);
  }
  for (const auto& s : p.test) EXPECT_GE(windows.anchor_steps[s.slot] + h.horizon, blocks.test.begin);
  EXPECT_EQ(p.train.size() + p.val.size() + p.test.size(), p.slot_count);
}

TEST(Problems, NodeSplitIsSharedBetweenLocalAndCentralized) {
  const auto d = small_multi_agency(5);
  const auto h = LearningHyper::defaults(TaskKind::node_classification);
  const auto full = problem_for(d, classify_task(), std::nullopt, h, 3);
  std::set<std::size_t> central_test(full.test[0].rows->begin(), full.test[0].rows->end());
  std::set<std::size_t> union_test;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto p = problem_for(d, classify_task(), a, h, 3);
    for (auto r : *p.test[0].rows) union_test.insert(p.global_ids[r]);
  }
  EXPECT_EQ(union_test, central_test);
}

TEST(Problems, EdgeTasksScoreOnlyInternalEdges) {
  auto rp = RecipeParams::defaults(Recipe::toy_bipartite);
  rp.n = 80;
  rp.agencies = 2;
  const auto d = generate_dataset(Recipe::toy_bipartite, rp);
  protocol::TaskConfig t;
  t.kind = TaskKind::edge_regression;
  const auto h = LearningHyper::from_task(t);
  const auto full = problem_for(d, t, std::nullopt, h);
  for (auto split : {Split::val, Split::test}) {
    for (const auto& [u, v] : full.samples(split)[0].pairs) {
      EXPECT_EQ(d.partition.assignment[u], d.partition.assignment[v]);
    }
  }
}

TEST(Problems, AgencyTargets) {
  auto rp = RecipeParams::defaults(Recipe::er_sis);
  rp.n = 40;
  rp.m = 100;
  rp.agencies = 2;
  const auto d = generate_dataset(Recipe::er_sis, rp);
  protocol::TaskConfig t;
  t.kind = TaskKind::node_regression;
  t.model = "customized_temporal";
  const auto p = problem_for(d, t, 1, LearningHyper::from_task(t));
  const Matrix y = agency_targets(p);
  ASSERT_EQ(static_cast<std::size_t>(y.rows()), p.slot_count);
  for (const auto& s : p.train) EXPECT_DOUBLE_EQ(y(static_cast<Eigen::Index>(s.slot), 0), s.target.mean());
  for (const auto& s : p.test) EXPECT_EQ(y(static_cast<Eigen::Index>(s.slot), 0), 0.0);

  const auto dc = separable_toy();
  auto h = LearningHyper::defaults(TaskKind::node_classification);
  h.node_split = {0.5, 0.25, 0.25};
  const auto pc = problem_for(dc, classify_task(), 0, h, 2);
  std::size_t ones = 0;
  for (auto r : *pc.train[0].rows) ones += pc.train[0].target(static_cast<Eigen::Index>(r), 0) == 1.0;
  const double majority = 2 * ones > pc.train[0].rows->size() ? 1.0 : 0.0;
  if (2 * ones != pc.train[0].rows->size()) {
    EXPECT_EQ(agency_targets(pc)(0, 0), majority);
  }
}

TEST(Hyper, PaperDefaults) {
  const auto edge = LearningHyper::defaults(TaskKind::edge_regression);
  EXPECT_EQ(edge.train.opt.kind, nn::OptimizerKind::sgd);
  EXPECT_DOUBLE_EQ(edge.train.opt.lr, 0.003);
  EXPECT_DOUBLE_EQ(edge.train.opt.weight_decay, 0.001);
  EXPECT_EQ(edge.train.epochs, 5000u);
  const auto cls = LearningHyper::defaults(TaskKind::node_classification);
  EXPECT_EQ(cls.lr_grid, (std::vector<double>{0.001, 0.005, 0.01, 0.05, 0.1}));
  const auto reg = LearningHyper::defaults(TaskKind::node_regression);
  EXPECT_EQ(reg.lookback, 20u);
  EXPECT_EQ(reg.train.patience, 50u);
}

TEST(Hyper, TaskOverridesAndErrors) {
  auto t = classify_task();
  t.hyper = {{"lr", 0.02}, {"epochs", 12}};
  const auto h = LearningHyper::from_task(t);
  EXPECT_TRUE(h.lr_grid.empty());
  EXPECT_DOUBLE_EQ(h.train.opt.lr, 0.02);
  EXPECT_EQ(h.train.epochs, 12u);
  t.hyper = {{"optimizer", "rmsprop"}};
  EXPECT_THROW(LearningHyper::from_task(t), protocol::ConfigError);
  t.hyper = {{"epochs", "many"}};
  EXPECT_THROW(LearningHyper::from_task(t), protocol::ConfigError);
}

TEST(Datasets, ErSisWritesAllFiles) {
  auto rp = RecipeParams::defaults(Recipe::er_sis);
  const auto d = generate_dataset(Recipe::er_sis, rp);
  EXPECT_EQ(d.node_count(), 300u);
  EXPECT_EQ(d.graph.edge_count(), 1200u);
  const auto dir = temp_dir("er_sis");
  d.save(dir);
  for (auto f : {"edges.csv", "features.csv", "labels.csv", "series.csv", "partition.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  for (std::size_t a = 0; a < 5; ++a) EXPECT_FALSE(d.partition.members(a).empty());
  const auto back = Dataset::load(dir);
  EXPECT_EQ(back.graph.edges(), d.graph.edges());
  EXPECT_EQ(back.partition.assignment, d.partition.assignment);
}

TEST(Datasets, SameSeedIsByteIdentical) {
  for (auto r : {Recipe::ba_sir, Recipe::toy_classify, Recipe::toy_bipartite}) {
    auto rp = RecipeParams::defaults(r);
    rp.seed = 11;
    const auto a = temp_dir("same_a"), b = temp_dir("same_b");
    generate_dataset(r, rp).save(a);
    generate_dataset(r, rp).save(b);
    for (const auto& e : std::filesystem::directory_iterator(a)) {
      EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << to_string(r) << " " << e.path().filename();
    }
  }
}

TEST(Datasets, SaveLoadSaveIsByteIdentical) {
  auto rp = RecipeParams::defaults(Recipe::toy_classify);
  const auto a = temp_dir("rt_a"), b = temp_dir("rt_b");
  generate_dataset(Recipe::toy_classify, rp).save(a);
  Dataset::load(a).save(b);
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
}

TEST(Datasets, RecipeNames) {
  for (auto r : {Recipe::er_sis, Recipe::er_sir, Recipe::ba_sis, Recipe::ba_sir, Recipe::toy_classify,
                 Recipe::toy_bipartite}) {
    EXPECT_EQ(recipe_from_string(to_string(r)), r);
  }
  EXPECT_THROW(recipe_from_string("cora"), std::invalid_argument);
}

TEST(Experiment, SchemaHasRowsPerModelAgencyMetricSeed) {
  const auto d = small_multi_agency(0);
  auto t = classify_task(4);
  t.hyper = {{"epochs", 20}, {"lr", 0.05}, {"global_epochs", 5}};
  ExperimentConfig cfg;
  cfg.task = t;
  cfg.seeds = {0, 1};
  PlaintextExchange ex(graph::build_global_graph(d.partition, graph::GlobalGraphMode::fully_connected), 60.0);
  const auto res = run_experiment(d, cfg, &ex);
  EXPECT_TRUE(res.report.failures.empty());
  // 3 agencies + "all", test and val acc, 3 models, 2 seeds
  EXPECT_EQ(res.report.rows.size(), 4u * 2u * 3u * 2u);
  for (const std::string m : {"local", "integrated", "centralized"}) {
    for (const std::string a : {"0", "1", "2"}) EXPECT_EQ(res.report.series(m, a, "agency", "acc").size(), 2u);
    EXPECT_EQ(res.report.series(m, "all", "multi", "acc").size(), 2u);
  }
  EXPECT_EQ(res.seeds[0].rounds.size(), 3u);
  EXPECT_EQ(res.report.header["hyper"]["epochs"], 20);
}

TEST(Experiment, CentralizedOnlyNeedsNoBackend) {
  const auto d = small_multi_agency(1);
  ExperimentConfig cfg;
  cfg.task = classify_task(4);
  cfg.task.hyper = {{"epochs", 5}};
  cfg.models = {ModelKind::centralized};
  const auto res = run_experiment(d, cfg, nullptr);
  EXPECT_FALSE(res.report.rows.empty());
  cfg.models = {ModelKind::integrated};
  EXPECT_THROW(run_experiment(d, cfg, nullptr), protocol::ConfigError);
}

TEST(Experiment, RegressionScopes) {
  auto rp = RecipeParams::defaults(Recipe::er_sis);
  rp.n = 30;
  rp.m = 80;
  rp.agencies = 2;
  rp.steps = 50;
  const auto d = generate_dataset(Recipe::er_sis, rp);
  ExperimentConfig cfg;
  cfg.task.task_id = "reg";
  cfg.task.kind = TaskKind::node_regression;
  cfg.task.model = "customized_temporal";
  cfg.task.dim = 4;
  cfg.task.hyper = {{"epochs", 2}, {"global_epochs", 2}};
  cfg.models = {ModelKind::local, ModelKind::integrated};
  PlaintextExchange ex(graph::build_global_graph(d.partition, graph::GlobalGraphMode::fully_connected), 60.0);
  const auto r = run_experiment(d, cfg, &ex).report;
  for (const std::string scope : {"node", "agency"}) EXPECT_EQ(r.series("local", "0", scope, "rmse").size(), 1u);
  EXPECT_EQ(r.series("integrated", "all", "multi", "pcc").size(), 1u);
}

TEST(Experiment, AgencyFailureIsRecordedAndLocalKept) {
  const auto d = small_multi_agency(2);
  ExperimentConfig cfg;
  cfg.task = classify_task(4);
  cfg.task.hyper = {{"epochs", 5}, {"lr", 0.01}};
  cfg.models = {ModelKind::local, ModelKind::integrated};
  struct Failing : ExchangeBackend {
    std::vector<ExchangeFn> open_task(const protocol::TaskConfig&) override {
      return std::vector<ExchangeFn>(3, [](int, const std::vector<double>&) -> ExchangeOutcome {
        throw ExchangeAborted("peer unreachable");
      });
    }
    std::string name() const override { return "failing"; }
    std::size_t agency_count() const override { return 3; }
  } failing;
  const auto res = run_experiment(d, cfg, &failing);
  EXPECT_EQ(res.report.failures.size(), 3u);
  const auto local = res.report.series("local", "all", "multi", "acc");
  ASSERT_EQ(local.size(), 1u);
  EXPECT_TRUE(local[0].second.has_value());
  for (const std::string a : {"0", "1", "2", "all"}) {
    const auto integrated = res.report.series("integrated", a, a == "all" ? "multi" : "agency", "acc");
    ASSERT_EQ(integrated.size(), 1u);
    EXPECT_FALSE(integrated[0].second.has_value()) << a;
  }
}

TEST(Experiment, Deterministic) {
  const auto d = small_multi_agency(3);
  ExperimentConfig cfg;
  cfg.task = classify_task(4);
  cfg.task.hyper = {{"epochs", 15}, {"lr", 0.05}};
  auto run = [&] {
    PlaintextExchange ex(graph::build_global_graph(d.partition, graph::GlobalGraphMode::fully_connected), 60.0);
    return run_experiment(d, cfg, &ex).report.to_csv();
  };
  EXPECT_EQ(run(), run());
}

TEST(Report, CsvJsonRoundTrip) {
  Report r;
  r.header = {{"task", "x"}};
  r.rows = {{"local", "0", "agency", "acc", 0, 0.75}, {"integrated", "all", "multi", "pcc", 3, std::nullopt}};
  r.partial = true;
  r.failures = {"seed 3: timeout"};
  EXPECT_EQ(r.to_csv(), "model,agency,scope,metric,seed,value\nlocal,0,agency,acc,0,0.75\nintegrated,all,multi,pcc,3,\n");
  const auto back = Report::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back.rows, r.rows);
  EXPECT_EQ(back.header, r.header);
  EXPECT_TRUE(back.partial);
  EXPECT_EQ(back.failures, r.failures);
  EXPECT_THROW(Report::from_json(nlohmann::json::object()), std::invalid_argument);
}

TEST(Report, TableMarksIntegratedWinners) {
  Report r;
  r.rows = {{"local", "all", "multi", "acc", 0, 0.5}, {"integrated", "all", "multi", "acc", 0, 0.7},
            {"local", "all", "multi", "rmse", 0, 1.0}, {"integrated", "all", "multi", "rmse", 0, 2.0},
            {"local", "all", "multi", "val_acc", 0, 0.1}};
  const auto table = r.render_table();
  EXPECT_NE(table.find("0.700*"), std::string::npos) << table;
  EXPECT_EQ(table.find("2.000*"), std::string::npos) << table;
  EXPECT_EQ(table.find("val_acc"), std::string::npos) << table;
}
