#include "cnl/harness/commands.hpp"

#include "cnl/crypto/paillier.hpp"
#include "cnl/crypto/seal.hpp"

#include <atomic>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace cnl::harness {

using nlohmann::json;
using protocol::ConfigError;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_runtime;
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// sleeps until a signal arrives or `secs` have passed (negative: no limit)
void hold(double secs) {
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (secs >= 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(secs)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::size_t agency_index(const std::string& node_id) {
  const std::string prefix = "agency-";
  if (node_id.rfind(prefix, 0) == 0) {
    try {
      return std::stoul(node_id.substr(prefix.size()));
    } catch (const std::exception&) {
    }
  }
  return 0;
}

// one round of random vectors through the cluster, checked against the
// plaintext neighbor sums
bool smoke_round(Cluster& cluster, const graph::Graph& agency_graph, const protocol::TaskConfig& task,
                 std::ostream& out) {
  const std::size_t k = cluster.agency_count();
  auto fns = cluster.open_task(task);
  std::mt19937_64 rng(task.dim * 7919 + k);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<std::vector<double>> values(k, std::vector<double>(task.dim));
  for (auto& v : values)
    for (auto& x : v) x = u(rng);
  std::vector<learning::ExchangeOutcome> got(k);
  std::vector<std::thread> threads;
  for (std::size_t a = 0; a < k; ++a) threads.emplace_back([&, a] { got[a] = fns[a](0, values[a]); });
  for (auto& t : threads) t.join();
  const auto adj = agency_graph.adjacency_list();
  bool ok = true;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0.0;
    for (std::size_t c = 0; c < task.dim; ++c) {
      double expect = 0.0;
      for (const auto& nb : adj[a]) expect += values[nb.node][c];
      worst = std::max(worst, std::abs(expect - got[a].sum.at(c)));
    }
    const double bound = static_cast<double>(std::max<std::size_t>(1, adj[a].size())) * std::ldexp(1.0, -21);
    const bool pass = !got[a].partial && worst <= bound;
    ok = ok && pass;
    out << agency_node_id(a) << ": addends " << got[a].addend_count << ", max error " << worst
        << (got[a].partial ? ", partial" : "") << (pass ? "" : "  MISMATCH") << "\n";
  }
  return ok;
}

}  // namespace

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

bool stop_requested() { return g_stop; }

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  auto number = [&](const std::string& t) -> std::uint64_t {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad seed list: " + s);
    }
    if (used != t.size() || t.empty() || t[0] == '-') throw ConfigError("bad seed list: " + s);
    return v;
  };
  std::vector<std::uint64_t> out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto lo = number(s.substr(0, dots)), hi = number(s.substr(dots + 2));
    if (hi < lo) throw ConfigError("bad seed range: " + s);
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    out.push_back(number(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<learning::ModelKind> parse_models(const std::string& s) {
  std::vector<learning::ModelKind> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    out.push_back(learning::model_kind_from_string(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

learning::Dataset resolve_dataset(const json& spec, const fs::path& base) {
  if (spec.is_string()) {
    fs::path dir = spec.get<std::string>();
    if (dir.is_relative() && !base.empty()) dir = base / dir;
    if (!fs::exists(dir / "edges.csv")) throw ConfigError("no dataset at " + dir.string());
    return learning::Dataset::load(dir);
  }
  if (spec.is_object() && spec.contains("recipe")) {
    learning::Recipe r;
    try {
      r = learning::recipe_from_string(spec["recipe"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return learning::generate_dataset(r, learning::RecipeParams::from_json(r, spec));
  }
  throw ConfigError("dataset must be a directory or {\"recipe\": ...}");
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  RunConfig c;
  c.base = base;
  try {
    c.dataset = j.at("dataset");
    c.task = protocol::TaskConfig::from_json(j.at("task"));
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j["models"]) c.models.push_back(learning::model_kind_from_string(m.get<std::string>()));
    }
    if (j.contains("seeds")) {
      c.seeds = j["seeds"].is_string() ? parse_seeds(j["seeds"].get<std::string>())
                                       : j["seeds"].get<std::vector<std::uint64_t>>();
    }
    c.exchange = j.value("exchange", c.exchange);
    json cluster = j.value("cluster", json::object());
    if (!cluster.contains("agencies")) cluster["agencies"] = 1;
    c.cluster = ClusterSpec::from_json(cluster);
    if (j.contains("out")) {
      c.out = j["out"].get<std::string>();
      if (c.out.is_relative() && !base.empty()) c.out = base / c.out;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (c.exchange != "cnns" && c.exchange != "plaintext") throw ConfigError("exchange must be cnns or plaintext");
  if (c.models.empty()) throw ConfigError("no models selected");
  if (c.seeds.empty()) throw ConfigError("no seeds selected");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_json(read_json(path), path.parent_path());
}

learning::ExperimentResult execute_run(const RunConfig& cfg) {
  const auto data = resolve_dataset(cfg.dataset, cfg.base);
  learning::ExperimentConfig ec;
  ec.task = cfg.task;
  ec.models = cfg.models;
  ec.seeds = cfg.seeds;
  ec.global_mode = cfg.cluster.topology == "by_reality" ? graph::GlobalGraphMode::by_reality
                                                         : graph::GlobalGraphMode::fully_connected;
  ec.extra_header = {{"topology", cfg.cluster.topology}, {"dataset", cfg.dataset}};

  const bool needs_exchange =
      std::find(cfg.models.begin(), cfg.models.end(), learning::ModelKind::integrated) != cfg.models.end();
  if (!needs_exchange) return learning::run_experiment(data, ec, nullptr);

  ClusterSpec spec = cfg.cluster;
  spec.agencies = data.partition.agency_count;
  const auto agency_graph = topology_graph(spec, &data);
  if (cfg.exchange == "plaintext") {
    learning::PlaintextExchange ex(agency_graph, spec.options.timeout_secs);
    return learning::run_experiment(data, ec, &ex);
  }
  ec.extra_header["paillier_bits"] = spec.options.paillier_bits;
  ec.extra_header["timeout_secs"] = spec.options.timeout_secs;
  Cluster cluster(agency_graph, spec);
  cluster.hello_all();
  return learning::run_experiment(data, ec, &cluster);
}

int report_exit_code(const learning::Report& r) {
  const bool any_value = std::any_of(r.rows.begin(), r.rows.end(), [](const auto& row) { return row.value.has_value(); });
  if (!any_value) return exit_runtime;
  if (r.partial || !r.failures.empty()) return exit_partial;
  return exit_ok;
}

int cmd_gen_data(const std::string& recipe, const fs::path& out, const json& overrides, std::ostream& os) {
  return guarded(std::cerr, [&] {
    learning::Recipe r;
    try {
      r = learning::recipe_from_string(recipe);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto params = learning::RecipeParams::from_json(r, overrides);
    const auto d = learning::generate_dataset(r, params);
    try {
      d.save(out);
    } catch (const std::exception& e) {
      throw std::runtime_error("cannot write dataset to " + out.string() + ": " + e.what());
    }
    os << learning::to_string(r) << ": " << d.node_count() << " nodes, " << d.graph.edge_count() << " edges, "
       << d.partition.agency_count << " agencies -> " << out.string() << "\n";
    return int(exit_ok);
  });
}

int cmd_keygen(const fs::path& out, int bits, bool paillier, bool force, std::ostream& os) {
  return guarded(std::cerr, [&] {
    if (fs::exists(out) && !force) throw ConfigError(out.string() + " exists; pass --force to replace it");
    if (paillier) {
      if (bits < 1024) throw ConfigError("Paillier keys need at least 1024 bits");
      auto rng = crypto::RandomSource::os();
      const auto kp = crypto::paillier_keygen(static_cast<std::size_t>(bits), rng);
      write_text(out, json{{"public", kp.pub.to_json()}, {"private", kp.priv.to_json()}}.dump(2) + "\n");
      os << "Paillier key (" << bits << " bits) -> " << out.string() << "\n";
    } else {
      if (bits < 2048) throw ConfigError("identity keys need at least 2048 bits");
      write_text(out, crypto::IdentityKey::generate(bits).private_pem());
      fs::permissions(out, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
      os << "identity key (" << bits << " bits) -> " << out.string() << "\n";
    }
    return int(exit_ok);
  });
}

int cmd_serve(const fs::path& config, const fs::path& announce, double hold_secs, std::ostream& os) {
  return guarded(std::cerr, [&] {
    auto cfg = protocol::PeerConfig::load(config.string());
    // relative paths are relative to the config file
    for (std::string* p : {&cfg.data_dir, &cfg.identity_key_path}) {
      if (!p->empty() && fs::path(*p).is_relative()) *p = (config.parent_path() / *p).string();
    }
    protocol::NodeOptions opts;
    opts.apply(protocol::EnvOverrides::read());
    std::optional<protocol::TaskConfig> task;
    if (!announce.empty()) task = protocol::TaskConfig::from_json(read_json(announce));

    std::optional<learning::Dataset> data;
    if (!cfg.data_dir.empty() && fs::exists(fs::path(cfg.data_dir) / "edges.csv")) {
      data = learning::Dataset::load(cfg.data_dir);
    }
    const std::size_t agency = agency_index(cfg.node_id);
    if (data && agency >= data->partition.agency_count) {
      throw ConfigError(cfg.node_id + " has no agency in the dataset partition");
    }

    protocol::Node node(cfg, opts);
    std::mutex log_mu;
    node.set_task_hook([&](protocol::Node& n, const protocol::TaskConfig& t) {
      try {
        n.share_public_key(t.task_id);
        if (!data) return;
        const auto h = learning::LearningHyper::from_task(t);
        const std::uint64_t seed = t.hyper.value("seed", std::uint64_t{0});
        const auto p = learning::make_problem(*data, t, h, agency, seed);
        learning::ExchangeFn fn = [&n, id = t.task_id](int round, const std::vector<double>& v) {
          auto r = n.exchange_round(id, round, v);
          return learning::ExchangeOutcome{std::move(r.sum), r.addend_count, r.partial, std::move(r.missing_agencies)};
        };
        learning::AgencyRun run;
        learning::run_agency(run, p, h, learning::derive_seed(seed, 100), &fn);
        learning::Report rep;
        rep.header = {{"task", t.to_json()}, {"hyper", h.to_json()}, {"node", n.id()}};
        rep.partial = run.partial;
        for (auto& r : learning::score_agency(p, *run.local, "local", agency, data->partition, seed)) rep.rows.push_back(r);
        for (auto& r : learning::score_agency(p, *run.integrated, "integrated", agency, data->partition, seed))
          rep.rows.push_back(r);
        const fs::path dir = fs::path(cfg.data_dir) / "reports" / t.task_id / n.id();
        rep.write(dir);
        std::lock_guard lock(log_mu);
        os << n.id() << ": task " << t.task_id << " done -> " << dir.string() << "\n" << std::flush;
      } catch (const std::exception& e) {
        std::lock_guard lock(log_mu);
        std::cerr << n.id() << ": task " << t.task_id << " failed: " << e.what() << "\n";
      }
    });
    node.start();
    os << cfg.node_id << " listening on " << cfg.listen << "\n" << std::flush;
    const auto greeted = node.hello_all();
    os << "hello: " << greeted << "/" << cfg.neighbors.size() << " neighbors\n" << std::flush;
    if (task) node.announce_task(*task);
    hold(hold_secs);
    node.stop();
    return int(exit_ok);
  });
}

int cmd_simulate(const fs::path& spec_path, const fs::path& out, double hold_secs, std::ostream& os) {
  return guarded(std::cerr, [&] {
    auto spec = ClusterSpec::from_json(read_json(spec_path));
    spec.options.apply(protocol::EnvOverrides::read());
    std::optional<learning::Dataset> data;
    if (!spec.dataset.empty()) {
      data = resolve_dataset(json(spec.dataset), spec_path.parent_path());
      if (data->partition.agency_count != spec.agencies) {
        throw ConfigError("dataset has " + std::to_string(data->partition.agency_count) + " agencies, spec has " +
                          std::to_string(spec.agencies));
      }
    }
    const auto agency_graph = topology_graph(spec, data ? &*data : nullptr);
    Cluster cluster(agency_graph, spec);
    const auto greeted = cluster.hello_all();
    os << spec.agencies << " agencies, " << cluster.link_count() << " links, " << greeted << "/"
       << 2 * cluster.link_count() << " hellos\n";
    bool ok = greeted == 2 * cluster.link_count();
    bool partial = false;
    for (const auto& task : spec.tasks) {
      if (stop_requested()) break;
      if (data) {
        learning::ExperimentConfig ec;
        ec.task = task;
        ec.models = {learning::ModelKind::local, learning::ModelKind::integrated};
        ec.seeds = {task.hyper.value("seed", std::uint64_t{0})};
        const auto res = learning::run_experiment(*data, ec, &cluster);
        res.report.write(out / task.task_id);
        os << "task " << task.task_id << ":\n" << res.report.render_table();
        partial = partial || report_exit_code(res.report) != exit_ok;
      } else {
        os << "task " << task.task_id << " (smoke round, dim " << task.dim << "):\n";
        ok = smoke_round(cluster, agency_graph, task, os) && ok;
      }
    }
    os << std::flush;
    hold(hold_secs);
    cluster.stop();
    if (!ok) return int(exit_runtime);
    return int(partial ? exit_partial : exit_ok);
  });
}

int cmd_run(const fs::path& config, const std::string& models, const std::string& seeds, const fs::path& out,
            std::ostream& os) {
  return guarded(std::cerr, [&] {
    auto cfg = RunConfig::load(config);
    if (!models.empty()) cfg.models = parse_models(models);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
    if (!out.empty()) cfg.out = out;
    cfg.cluster.options.apply(protocol::EnvOverrides::read());
    const auto res = execute_run(cfg);
    res.report.write(cfg.out);
    os << res.report.render_table();
    os << "report -> " << (cfg.out / "report.csv").string() << "\n";
    return report_exit_code(res.report);
  });
}

int cmd_report(const fs::path& in, const std::string& format, std::ostream& os) {
  return guarded(std::cerr, [&] {
    if (format != "table" && format != "csv") throw ConfigError("format must be table or csv");
    learning::Report r;
    try {
      r = learning::Report::from_json(read_json(in));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    os << (format == "csv" ? r.to_csv() : r.render_table());
    return int(exit_ok);
  });
}

}  // namespace cnl::harness
