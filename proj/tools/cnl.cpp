#include "cnl/harness/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace h = cnl::harness;

int main(int argc, char** argv) {
  CLI::App app{"cnl: cross-agency graph learning over an encrypted neighbor exchange"};
  app.require_subcommand(1);

  std::string recipe = "er_sis", out;
  std::string params_json = "{}";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  gen->add_option("--recipe", recipe, "er_sis|er_sir|ba_sis|ba_sir|toy_classify|toy_bipartite");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--params", params_json, "JSON object of generator parameters");

  int bits = 2048;
  bool paillier = false, force = false;
  auto* keygen = app.add_subcommand("keygen", "write an RSA identity key (or a Paillier key pair)");
  keygen->add_option("--out", out, "key file")->required();
  keygen->add_option("--bits", bits, "modulus size");
  keygen->add_flag("--paillier", paillier, "write a Paillier key pair as JSON");
  keygen->add_flag("--force", force, "overwrite an existing file");

  std::string config, announce;
  double hold = -1.0;
  auto* serve = app.add_subcommand("serve", "run one node");
  serve->add_option("--config", config, "peer config JSON")->required();
  serve->add_option("--announce", announce, "task JSON to announce after startup");
  serve->add_option("--hold", hold, "seconds to serve before exiting (default: until signalled)");

  std::string spec;
  auto* simulate = app.add_subcommand("simulate", "run a loopback cluster from a spec");
  simulate->add_option("--spec", spec, "cluster spec JSON")->required();
  simulate->add_option("--out", out, "report directory");
  simulate->add_option("--hold", hold, "seconds to keep serving after the tasks");

  std::string models, seeds;
  auto* run = app.add_subcommand("run", "train and evaluate the selected models");
  run->add_option("--config", config, "run config JSON")->required();
  run->add_option("--models", models, "comma list of local,integrated,centralized");
  run->add_option("--seeds", seeds, "seed range a..b or comma list");
  run->add_option("--out", out, "report directory (overrides the config)");

  std::string in, format = "table";
  auto* report = app.add_subcommand("report", "render a report.json");
  report->add_option("--in", in, "report.json")->required();
  report->add_option("--format", format, "table|csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? h::exit_ok : h::exit_config;
  }

  h::install_signal_handlers();
  if (gen->parsed()) {
    nlohmann::json params;
    try {
      params = nlohmann::json::parse(params_json);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "config error: --params: " << e.what() << "\n";
      return h::exit_config;
    }
    return h::cmd_gen_data(recipe, out, params, std::cout);
  }
  if (keygen->parsed()) return h::cmd_keygen(out, bits, paillier, force, std::cout);
  if (serve->parsed()) return h::cmd_serve(config, announce, hold, std::cout);
  if (simulate->parsed()) return h::cmd_simulate(spec, out.empty() ? "reports" : out, hold < 0 ? 0.0 : hold, std::cout);
  if (run->parsed()) return h::cmd_run(config, models, seeds, out, std::cout);
  return h::cmd_report(in, format, std::cout);
}
