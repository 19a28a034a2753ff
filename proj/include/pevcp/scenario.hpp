#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pevcp/model.hpp"
#include "pevcp/netsim.hpp"
#include "pevcp/processor.hpp"

namespace pevcp {

struct PopulationParams {
  int horizon = 16;
  double dt_hours = 1.0;
  Vector price;  // attached to every sampled spec
  double alpha = 1e-4;
  double p_max_kw = 3.3;
  double eta = 0.9;
  double cap_lo = 18.0, cap_hi = 20.0;
  double soc_start_lo = 0.3, soc_start_hi = 0.5;
  double soc_target_lo = 0.7, soc_target_hi = 0.9;
  double soc_max = 1.0;
  std::vector<double> arrival_weights;    // per slot, defaults when empty
  std::vector<double> departure_weights;  // per slot, defaults when empty
  int resample_cap = 1000;
};

/// Default 16-slot curves (17:00 through 09:00, hourly): day-ahead price
/// with an evening peak and an overnight trough, and one household's
/// baseline load with the same shape.
Vector default_price_curve();
Vector default_household_load();
std::vector<double> default_arrival_weights(int horizon);
std::vector<double> default_departure_weights(int horizon);

std::vector<PevSpec> sample_population(int n, std::uint64_t seed, const PopulationParams& params);

/// Capacity from the baseline load: "headroom" gives max(baseload) -
/// baseload_t; "valley" gives max(0, level - baseload_t).
Vector build_L(const Vector& baseload, const std::string& policy, double valley_level = 0.0);

/// Named communication topologies (bidirectional, static, tbar = 1).
/// ieee37: 36 nodes, diameter 15. alt37: 36 nodes, diameter 10.
/// ieee123: 122 nodes.
GraphSchedule feeder_topology(const std::string& name, int n = 0);
GraphSchedule custom_topology(const std::string& edge_csv_path, int n);

// CSV ingestion: "slot,value" rows with a header line.
Vector load_series_csv(const std::string& path, int horizon);
void save_series_csv(const std::string& path, const Vector& values,
                     const std::string& value_header);

struct ScenarioConfig {
  int n = 4;
  int horizon = 16;
  double dt_hours = 1.0;
  std::uint64_t seed = 1;

  std::string topology = "line";
  std::string topology_file;
  std::vector<std::string> switching;  // alternate named topologies
  long switch_every = 1;
  int tbar = 1;

  std::string prices_csv, baseload_csv, roster_csv;
  std::string capacity_policy = "headroom";
  double valley_level = 0.0;
  double headroom_margin = 0.03;  // uniform capacity floor, fraction of peak
  double capacity_scale = 1.0;

  double alpha = 1e-4;
  double m_lo = 150.0, m_hi = 200.0;
  bool m_auto_scale = true;

  long default_activation = 0;
  std::map<int, long> activation_overrides;

  // protocol
  double epsilon = 1e-4;
  double rho = 1e-4;
  double eps_active = 1e-7;
  long max_cuts_factor = 50;  // x dim; 0 disables the cap

  // simulation
  double q_delay = 0.0, q_drop = 0.0;
  int delay_ticks = 1;
  std::string wake_dist = "uniform";
  double wake_a = 0.5, wake_b = 1.5;
  std::uint64_t sim_seed = 7;
  long round_cap = 200000;
};

ScenarioConfig load_config_json(const std::string& path);
std::string config_to_json(const ScenarioConfig& config);

/// A fully assembled experiment: problem instance, communication graph,
/// per-node objective bounds, and the criterion window K = d_G * tbar.
struct Scenario {
  CocInstance instance;
  GraphSchedule graph;
  std::vector<double> m_init;
  Vector baseload;
  int graph_diameter = 0;
  int criterion_window = 0;
  ScenarioConfig config;
};

Scenario build_scenario(const ScenarioConfig& config);

std::vector<ProcessorState> make_processors(const Scenario& scenario);

RunConfig run_config_of(const ScenarioConfig& config);

}  // namespace pevcp
