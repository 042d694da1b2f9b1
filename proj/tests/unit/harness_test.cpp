#include "cnl/harness/commands.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

using namespace cnl;
using namespace cnl::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cnl_harness_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

ClusterSpec fast_spec(std::size_t k, const std::string& topology = "fully_connected") {
  ClusterSpec s;
  s.agencies = k;
  s.topology = topology;
  s.options.test_keys = true;
  s.options.paillier_bits = 256;
  s.options.timeout_secs = 20.0;
  return s;
}

protocol::TaskConfig task(const std::string& id, std::size_t dim = 6) {
  protocol::TaskConfig t;
  t.task_id = id;
  t.kind = protocol::TaskKind::node_classification;
  t.dim = dim;
  t.task_iter = 2;
  t.he_agency_count = 1;
  return t;
}

std::vector<learning::ExchangeOutcome> round_through(learning::ExchangeBackend& b, const protocol::TaskConfig& t,
                                                     const std::vector<std::vector<double>>& values) {
  auto fns = b.open_task(t);
  std::vector<learning::ExchangeOutcome> out(values.size());
  std::vector<std::thread> th;
  for (std::size_t a = 0; a < values.size(); ++a) th.emplace_back([&, a] { out[a] = fns[a](0, values[a]); });
  for (auto& x : th) x.join();
  return out;
}

}  // namespace

TEST(Seeds, RangeListAndSingle) {
  EXPECT_EQ(parse_seeds("0..4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_seeds("3,1,7"), (std::vector<std::uint64_t>{3, 1, 7}));
  EXPECT_EQ(parse_seeds("9"), (std::vector<std::uint64_t>{9}));
  EXPECT_EQ(parse_seeds("2..2"), (std::vector<std::uint64_t>{2}));
}

TEST(Seeds, Malformed) {
  for (const char* bad : {"", "4..1", "a", "1,,2", "-1", "1..x", "1.5"}) {
    EXPECT_THROW(parse_seeds(bad), protocol::ConfigError) << bad;
  }
}

TEST(Models, Parse) {
  const auto m = parse_models("local,centralized");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], learning::ModelKind::local);
  EXPECT_EQ(m[1], learning::ModelKind::centralized);
  EXPECT_THROW(parse_models("local,global"), protocol::ConfigError);
}

TEST(ClusterSpecJson, RoundTripAndErrors) {
  auto s = fast_spec(4, "explicit");
  s.edges = {{0, 1}, {2, 3}};
  s.tasks.push_back(task("x"));
  const auto back = ClusterSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());

  EXPECT_THROW(ClusterSpec::from_json({{"agencies", 0}}), protocol::ConfigError);
  EXPECT_THROW(ClusterSpec::from_json({{"topology", "mesh"}}), protocol::ConfigError);
  EXPECT_THROW(ClusterSpec::from_json({{"agencies", 2}, {"topology", "explicit"}, {"edges", {{0, 2}}}}),
               protocol::ConfigError);
  EXPECT_THROW(ClusterSpec::from_json({{"topology", "by_reality"}}), protocol::ConfigError);
  EXPECT_THROW(ClusterSpec::from_json({{"agencies", "two"}}), protocol::ConfigError);
}

TEST(Topology, Shapes) {
  EXPECT_EQ(topology_graph(fast_spec(5)).edge_count(), 10u);
  EXPECT_EQ(topology_graph(fast_spec(5, "ring")).edge_count(), 5u);
  EXPECT_EQ(topology_graph(fast_spec(2, "ring")).edge_count(), 1u);
  const auto star = topology_graph(fast_spec(4, "star"));
  EXPECT_EQ(star.edge_count(), 3u);
  EXPECT_EQ(star.adjacency_list()[0].size(), 3u);
  EXPECT_THROW(topology_graph(fast_spec(3, "by_reality")), protocol::ConfigError);
}

TEST(Topology, ByRealityFollowsCrossEdges) {
  auto params = learning::RecipeParams::defaults(learning::Recipe::toy_classify);
  const auto d = learning::generate_dataset(learning::Recipe::toy_classify, params);
  auto s = fast_spec(d.partition.agency_count, "by_reality");
  const auto g = topology_graph(s, &d);
  EXPECT_EQ(g.node_count(), d.partition.agency_count);
  for (const auto& e : g.edges()) EXPECT_NE(e.src, e.dst);
}

// The encrypted exchange must reproduce the plaintext neighbor sums up to
// fixed-point rounding.
TEST(Cluster, MatchesPlaintextSums) {
  for (const std::string topo : {"ring", "star", "fully_connected"}) {
    const auto spec = fast_spec(4, topo);
    const auto g = topology_graph(spec);
    Cluster cluster(g, spec);
    EXPECT_EQ(cluster.hello_all(), 2 * cluster.link_count());
    learning::PlaintextExchange plain(g);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50, 50);
    std::vector<std::vector<double>> v(4, std::vector<double>(6));
    for (auto& row : v)
      for (auto& x : row) x = u(rng);
    const auto enc = round_through(cluster, task("sum-" + topo), v);
    const auto ref = round_through(plain, task("sum-" + topo), v);
    for (std::size_t a = 0; a < 4; ++a) {
      EXPECT_FALSE(enc[a].partial);
      EXPECT_EQ(enc[a].addend_count, ref[a].addend_count) << topo << " " << a;
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(enc[a].sum[c], ref[a].sum[c], 4 * std::ldexp(1.0, -21));
    }
  }
}

TEST(Cluster, KilledAgencyGivesPartialRound) {
  auto spec = fast_spec(3);
  spec.options.timeout_secs = 2.0;
  Cluster cluster(topology_graph(spec), spec);
  cluster.hello_all();
  auto fns = cluster.open_task(task("dead"));
  cluster.kill(2);
  std::vector<learning::ExchangeOutcome> out(2);
  std::thread t0([&] { out[0] = fns[0](0, {1, 1, 1, 1, 1, 1}); });
  std::thread t1([&] { out[1] = fns[1](0, {2, 2, 2, 2, 2, 2}); });
  t0.join();
  t1.join();
  // a submission routed to the dead HE agency is lost with it
  const double sent[] = {2.0, 1.0};
  for (int a : {0, 1}) {
    EXPECT_TRUE(out[a].partial) << a;
    // only an HE agency that never delivered is listed as missing
    EXPECT_LE(out[a].missing.size(), 1u) << a;
    if (!out[a].missing.empty()) EXPECT_EQ(out[a].missing[0], "agency-2") << a;
    ASSERT_LE(out[a].addend_count, 1u) << a;
    EXPECT_NEAR(out[a].sum[0], sent[a] * static_cast<double>(out[a].addend_count), 1e-6) << a;
  }
}

TEST(Cluster, AbortFailsLaterRounds) {
  auto spec = fast_spec(2);
  Cluster cluster(topology_graph(spec), spec);
  auto fns = cluster.open_task(task("abort"));
  cluster.abort();
  EXPECT_THROW(fns[0](0, std::vector<double>(6, 0.0)), learning::ExchangeAborted);
}

TEST(Cluster, ExperimentThroughEncryptedNodes) {
  auto params = learning::RecipeParams::defaults(learning::Recipe::toy_classify);
  params.n = 60;
  params.agencies = 3;
  const auto d = learning::generate_dataset(learning::Recipe::toy_classify, params);
  auto spec = fast_spec(3);
  Cluster cluster(topology_graph(spec), spec);
  learning::ExperimentConfig ec;
  ec.task = task("exp", 4);
  ec.models = {learning::ModelKind::local, learning::ModelKind::integrated};
  const auto res = learning::run_experiment(d, ec, &cluster);
  EXPECT_FALSE(res.report.partial);
  EXPECT_TRUE(res.report.failures.empty());
  EXPECT_EQ(report_exit_code(res.report), exit_ok);
  for (const auto& r : res.report.rows) EXPECT_TRUE(r.value.has_value()) << r.model << " " << r.metric;
}

TEST(Commands, GenDataAndUnwritableTarget) {
  const auto dir = scratch("gen");
  std::ostringstream os;
  EXPECT_EQ(cmd_gen_data("toy_classify", dir / "d", json::object(), os), exit_ok);
  EXPECT_TRUE(fs::exists(dir / "d" / "edges.csv"));
  EXPECT_EQ(cmd_gen_data("nope", dir / "e", json::object(), os), exit_config);
  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(cmd_gen_data("toy_classify", dir / "file" / "sub", json::object(), os), exit_runtime);
}

TEST(Commands, KeygenRefusesOverwrite) {
  const auto dir = scratch("key");
  std::ostringstream os;
  EXPECT_EQ(cmd_keygen(dir / "id.pem", 2048, false, false, os), exit_ok);
  const auto key = crypto::IdentityKey::load_or_create((dir / "id.pem").string());
  EXPECT_FALSE(key.public_pem().empty());
  EXPECT_EQ(cmd_keygen(dir / "id.pem", 2048, false, false, os), exit_config);
  EXPECT_EQ(cmd_keygen(dir / "id.pem", 2048, false, true, os), exit_ok);
  EXPECT_EQ(cmd_keygen(dir / "p.json", 256, true, false, os), exit_config);
}

TEST(Commands, RunReportAndExitCodes) {
  const auto dir = scratch("run");
  write_json(dir / "run.json", {{"dataset", {{"recipe", "toy_classify"}, {"n", 60}, {"agencies", 3}}},
                                {"task", task("r", 4).to_json()},
                                {"models", {"local", "centralized"}},
                                {"out", "out"}});
  std::ostringstream os;
  EXPECT_EQ(cmd_run(dir / "run.json", "", "0..1", {}, os), exit_ok);
  ASSERT_TRUE(fs::exists(dir / "out" / "report.csv"));
  ASSERT_TRUE(fs::exists(dir / "out" / "report.json"));

  std::ostringstream csv;
  EXPECT_EQ(cmd_report(dir / "out" / "report.json", "csv", csv), exit_ok);
  EXPECT_EQ(csv.str().rfind("model,agency,scope,metric,seed,value\n", 0), 0u);
  std::ifstream f(dir / "out" / "report.csv");
  EXPECT_EQ(csv.str(), std::string(std::istreambuf_iterator<char>(f), {}));

  EXPECT_EQ(cmd_report(dir / "out" / "report.json", "xml", os), exit_config);
  EXPECT_EQ(cmd_report(dir / "missing.json", "table", os), exit_config);
  EXPECT_EQ(cmd_run(dir / "run.json", "local,bogus", "", {}, os), exit_config);
  EXPECT_EQ(cmd_run(dir / "run.json", "", "5..1", {}, os), exit_config);
  write_json(dir / "bad.json", {{"task", task("r").to_json()}});
  EXPECT_EQ(cmd_run(dir / "bad.json", "", "", {}, os), exit_config);
  write_json(dir / "nodata.json", {{"dataset", "absent"}, {"task", task("r").to_json()}});
  EXPECT_EQ(cmd_run(dir / "nodata.json", "", "", {}, os), exit_config);
}

TEST(Commands, PartialReportExitCode) {
  learning::Report r;
  EXPECT_EQ(report_exit_code(r), exit_runtime);
  r.rows.push_back({"local", "0", "agency", "acc", 0, 0.5});
  EXPECT_EQ(report_exit_code(r), exit_ok);
  r.partial = true;
  EXPECT_EQ(report_exit_code(r), exit_partial);
  r.partial = false;
  r.failures.push_back("seed 0, agency 1: boom");
  EXPECT_EQ(report_exit_code(r), exit_partial);
}

TEST(Commands, SimulateSmokeRound) {
  const auto dir = scratch("sim");
  auto spec = fast_spec(3, "ring");
  spec.tasks.push_back(task("smoke", 5));
  write_json(dir / "spec.json", spec.to_json());
  std::ostringstream os;
  EXPECT_EQ(cmd_simulate(dir / "spec.json", dir / "out", 0.0, os), exit_ok) << os.str();
  EXPECT_NE(os.str().find("agency-2: addends 2"), std::string::npos) << os.str();
}

TEST(Commands, EnvOverrideRejectsGarbage) {
  const auto dir = scratch("env");
  auto spec = fast_spec(2);
  write_json(dir / "spec.json", spec.to_json());
  ::setenv("CNL_TIMEOUT_SECS", "soon", 1);
  std::ostringstream os;
  EXPECT_EQ(cmd_simulate(dir / "spec.json", dir / "out", 0.0, os), exit_config);
  ::unsetenv("CNL_TIMEOUT_SECS");
}
