#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pevcp/metrics.hpp"
#include "pevcp/scenario.hpp"

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("PEVCP_OUT")) return env;
  return ".";
}

struct Overrides {
  std::optional<std::uint64_t> seed, sim_seed;
  std::optional<double> epsilon, rho, q_delay, q_drop, capacity_scale;
  std::optional<long> round_cap;

  void apply(pevcp::ScenarioConfig& c) const {
    if (seed) c.seed = *seed;
    if (sim_seed) c.sim_seed = *sim_seed;
    if (epsilon) c.epsilon = *epsilon;
    if (rho) c.rho = *rho;
    if (q_delay) c.q_delay = *q_delay;
    if (q_drop) c.q_drop = *q_drop;
    if (capacity_scale) c.capacity_scale = *capacity_scale;
    if (round_cap) c.round_cap = *round_cap;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "scenario seed override");
  cmd->add_option("--sim-seed", o.sim_seed, "simulation seed override");
  cmd->add_option("--epsilon", o.epsilon, "stop tolerance override");
  cmd->add_option("--rho", o.rho, "master penalty override");
  cmd->add_option("--q-delay", o.q_delay, "per-link delay probability");
  cmd->add_option("--q-drop", o.q_drop, "per-message drop probability");
  cmd->add_option("--capacity-scale", o.capacity_scale, "scales the capacity vector");
  cmd->add_option("--round-cap", o.round_cap, "global tick cap");
}

int cmd_run(const std::string& config_path, const std::string& out_flag,
            const Overrides& overrides) {
  auto config = pevcp::load_config_json(config_path);
  overrides.apply(config);
  const auto scenario = pevcp::build_scenario(config);
  if (!pevcp::verify_Tbar(scenario.graph, scenario.graph.tbar,
                          scenario.graph.tbar * 8L)) {
    std::cerr << "error: graph schedule is not " << scenario.graph.tbar
              << "-strongly connected\n";
    return 1;
  }
  const auto result = pevcp::run_experiment(scenario);

  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "trace.jsonl", result.trace_jsonl);
  write_file(dir / "summary.json", result.summary_json);
  write_file(dir / "errors.csv", pevcp::errors_to_csv(result.errors));

  std::ostringstream profile_csv;
  profile_csv << "slot,baseload_kw,capacity_kw,pev_total_kw\n";
  profile_csv.precision(12);
  pevcp::Vector total = pevcp::Vector::Zero(scenario.instance.horizon);
  for (const auto& p : result.extracted_profiles)
    if (p.size() == scenario.instance.horizon) total += p;
  for (int t = 0; t < scenario.instance.horizon; ++t)
    profile_csv << (t + 1) << ',' << scenario.baseload[t] << ','
                << scenario.instance.capacity[t] << ',' << total[t] << '\n';
  write_file(dir / "load_profile.csv", profile_csv.str());

  std::cout << (result.trace.converged ? "converged" : "round cap reached") << " after "
            << result.trace.ticks << " ticks; summary written to "
            << (dir / "summary.json").string() << "\n";
  return result.trace.converged ? 0 : 2;
}

int cmd_baselines(const std::string& config_path, const std::string& out_flag,
                  const Overrides& overrides) {
  auto config = pevcp::load_config_json(config_path);
  overrides.apply(config);
  const auto scenario = pevcp::build_scenario(config);
  const auto result = pevcp::run_experiment(scenario);
  const auto rows = pevcp::compare_baselines(scenario, result);
  const std::string csv = pevcp::baseline_table_csv(rows);

  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "baselines.csv", csv);
  std::cout << csv;
  return result.trace.converged ? 0 : 2;
}

int cmd_verify_graph(const std::string& config_path, const std::string& topology, int n,
                     int tbar, long horizon) {
  pevcp::GraphSchedule graph;
  if (!config_path.empty()) {
    const auto config = pevcp::load_config_json(config_path);
    graph = pevcp::build_scenario(config).graph;
    tbar = graph.tbar;
  } else {
    graph = pevcp::feeder_topology(topology, n);
    graph.tbar = tbar;
  }
  const int d = pevcp::diameter(graph);
  const bool ok = pevcp::verify_Tbar(graph, tbar, std::max<long>(horizon, tbar));
  std::cout << "nodes: " << graph.n << "\ndiameter: " << d << "\ntbar: " << tbar
            << "\ntbar_strongly_connected: " << (ok ? "true" : "false")
            << "\ncriterion_window: " << d * tbar << "\n";
  return ok ? 0 : 1;
}

int cmd_sample(int n, std::uint64_t seed, const std::string& out_path) {
  pevcp::PopulationParams params;
  params.price = pevcp::default_price_curve();
  const auto pevs = pevcp::sample_population(n, seed, params);
  pevcp::save_roster_csv(out_path, pevs);
  std::cout << "wrote " << pevs.size() << " PEVs to " << out_path << "\n";
  return 0;
}

int cmd_replay(const std::string& trace_path, const std::string& summary_path,
               const std::string& out_flag) {
  const auto trace = pevcp::trace_from_jsonl(read_file(trace_path));
  std::optional<double> j_star;
  double epsilon = 1e-4;
  if (!summary_path.empty()) {
    const auto summary = nlohmann::json::parse(read_file(summary_path));
    if (summary.contains("j_star") && !summary["j_star"].is_null())
      j_star = summary["j_star"].get<double>();
    if (summary.contains("config"))
      epsilon = summary["config"]["protocol"].value("epsilon", epsilon);
  } else {
    std::cerr << "warning: no summary given, e_I omitted\n";
  }
  const auto errors = pevcp::compute_errors(trace, j_star, epsilon);
  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "errors.csv", pevcp::errors_to_csv(errors));
  std::cout << "recomputed error series over " << errors.e2.size() << " ticks\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous cutting-plane coordination of PEV charging"};
  app.require_subcommand(1);

  std::string config_path, out_flag, topology = "ieee37", trace_path, summary_path,
              roster_out = "roster.csv";
  int n = 36, tbar = 1;
  long horizon = 64;
  std::uint64_t seed = 1;
  Overrides overrides;

  auto* run_cmd = app.add_subcommand("run", "run one experiment from a config");
  run_cmd->add_option("--config", config_path, "scenario config (JSON)")->required();
  run_cmd->add_option("--out", out_flag, "output directory (default $PEVCP_OUT or .)");
  add_override_flags(run_cmd, overrides);

  auto* base_cmd = app.add_subcommand("baselines", "compare charging strategies");
  base_cmd->add_option("--config", config_path, "scenario config (JSON)")->required();
  base_cmd->add_option("--out", out_flag, "output directory");
  add_override_flags(base_cmd, overrides);

  auto* graph_cmd = app.add_subcommand("verify-graph", "diameter and connectivity window");
  graph_cmd->add_option("--config", config_path, "scenario config (JSON)");
  graph_cmd->add_option("--topology", topology, "named topology when no config given");
  graph_cmd->add_option("--n", n, "node count for line/ring");
  graph_cmd->add_option("--tbar", tbar, "connectivity window");
  graph_cmd->add_option("--horizon", horizon, "ticks to verify");

  auto* sample_cmd = app.add_subcommand("sample", "sample a PEV roster");
  sample_cmd->add_option("--n", n, "roster size")->required();
  sample_cmd->add_option("--seed", seed, "sampling seed");
  sample_cmd->add_option("--out", roster_out, "roster CSV path");

  auto* replay_cmd = app.add_subcommand("replay", "recompute metrics from a trace");
  replay_cmd->add_option("--trace", trace_path, "trace JSONL")->required();
  replay_cmd->add_option("--summary", summary_path, "summary JSON (for J* and epsilon)");
  replay_cmd->add_option("--out", out_flag, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, out_flag, overrides);
    if (base_cmd->parsed()) return cmd_baselines(config_path, out_flag, overrides);
    if (graph_cmd->parsed())
      return cmd_verify_graph(config_path, topology, n, tbar, horizon);
    if (sample_cmd->parsed()) return cmd_sample(n, seed, roster_out);
    if (replay_cmd->parsed()) return cmd_replay(trace_path, summary_path, out_flag);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
