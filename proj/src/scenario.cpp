#include "pevcp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pevcp/baselines.hpp"

namespace pevcp {

namespace {

using json = nlohmann::json;

struct DetRng {
  std::mt19937_64 eng;
  explicit DetRng(std::uint64_t seed) : eng(seed) {}
  double uniform01() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
  int weighted(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = uniform01() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      r -= w[i];
      if (r <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }
};

std::vector<Edge> bidirectional(const std::vector<Edge>& arcs) {
  std::vector<Edge> out;
  for (const auto& [a, b] : arcs) {
    out.emplace_back(a, b);
    out.emplace_back(b, a);
  }
  return out;
}

GraphSchedule static_schedule(int n, std::vector<Edge> undirected_arcs) {
  GraphSchedule g;
  g.n = n;
  g.phases.push_back(bidirectional(undirected_arcs));
  g.tbar = 1;
  return g;
}

// 16-node trunk plus laterals; trunk ends realize the diameter of 15.
std::vector<Edge> ieee37_arcs() {
  std::vector<Edge> arcs;
  for (int i = 0; i < 15; ++i) arcs.emplace_back(i, i + 1);
  int next = 16;
  for (int j = 1; j <= 14; ++j) arcs.emplace_back(j, next++);  // 14 single laterals
  for (int root : {4, 8, 12}) {  // three depth-2 laterals
    arcs.emplace_back(root, next);
    arcs.emplace_back(next, next + 1);
    next += 2;
  }
  return arcs;
}

// 11-node trunk variant of the same feeder with diameter 10.
std::vector<Edge> alt37_arcs() {
  std::vector<Edge> arcs;
  for (int i = 0; i < 10; ++i) arcs.emplace_back(i, i + 1);
  int next = 11;
  for (int j = 1; j <= 9; ++j) arcs.emplace_back(j, next++);  // 9 single laterals
  for (int root : {2, 3, 4, 5, 6, 7, 8}) {  // seven depth-2 laterals
    arcs.emplace_back(root, next);
    arcs.emplace_back(next, next + 1);
    next += 2;
  }
  arcs.emplace_back(4, next++);  // two extra singles
  arcs.emplace_back(6, next++);
  return arcs;
}

std::vector<Edge> feeder_tree_arcs(int n, int trunk) {
  std::vector<Edge> arcs;
  for (int i = 0; i < trunk - 1; ++i) arcs.emplace_back(i, i + 1);
  int next = trunk;
  int pos = 1;
  int len = 1;
  while (next < n) {
    int root = pos;
    for (int d = 0; d < len && next < n; ++d) {
      arcs.emplace_back(root, next);
      root = next++;
    }
    pos = pos % (trunk - 2) + 1;
    len = len % 3 + 1;
  }
  return arcs;
}

}  // namespace

Vector default_price_curve() {
  Vector p(16);
  p << 0.082, 0.090, 0.087, 0.078, 0.070, 0.062, 0.055, 0.048, 0.040, 0.034, 0.030, 0.028,
      0.029, 0.033, 0.042, 0.046;
  return p;
}

Vector default_household_load() {
  Vector b(16);
  b << 1.90, 2.20, 2.40, 2.30, 2.00, 1.60, 1.30, 1.10, 0.90, 0.80, 0.75, 0.70, 0.72, 0.80,
      1.00, 1.20;
  return b;
}

std::vector<double> default_arrival_weights(int horizon) {
  std::vector<double> w(static_cast<std::size_t>(horizon), 0.0);
  const double base[] = {1.0, 4.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.1};
  for (std::size_t i = 0; i < std::min<std::size_t>(8, w.size()); ++i) w[i] = base[i];
  if (w.empty()) throw std::invalid_argument("horizon must be positive");
  return w;
}

std::vector<double> default_departure_weights(int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  std::vector<double> w(static_cast<std::size_t>(horizon), 0.0);
  const double tail[] = {0.2, 0.5, 1.0, 2.5, 4.0, 2.0};
  for (int i = 0; i < 6; ++i) {
    const int slot = horizon - 6 + i;
    if (slot >= 0) w[static_cast<std::size_t>(slot)] = tail[i];
  }
  return w;
}

std::vector<PevSpec> sample_population(int n, std::uint64_t seed,
                                       const PopulationParams& params) {
  if (n < 1) throw std::invalid_argument("sample_population: n must be >= 1");
  if (params.price.size() != params.horizon)
    throw std::invalid_argument("sample_population: price length != horizon");
  const auto arrival = params.arrival_weights.empty()
                           ? default_arrival_weights(params.horizon)
                           : params.arrival_weights;
  const auto departure = params.departure_weights.empty()
                             ? default_departure_weights(params.horizon)
                             : params.departure_weights;

  DetRng rng(seed);
  std::vector<PevSpec> out;
  for (int i = 0; i < n; ++i) {
    PevSpec s;
    s.id = i;
    s.p_max_kw = params.p_max_kw;
    s.eta = params.eta;
    s.alpha = params.alpha;
    s.price = params.price;
    s.soc_max = params.soc_max;
    bool ok = false;
    for (int attempt = 0; attempt < params.resample_cap; ++attempt) {
      s.cap_kwh = rng.uniform(params.cap_lo, params.cap_hi);
      s.soc_start = rng.uniform(params.soc_start_lo, params.soc_start_hi);
      s.soc_target = rng.uniform(params.soc_target_lo, params.soc_target_hi);
      s.t_arrive = rng.weighted(arrival) + 1;
      s.t_depart = rng.weighted(departure) + 1;
      if (s.t_arrive >= s.t_depart) continue;
      const double demand = (s.soc_target - s.soc_start) * s.cap_kwh;
      if (params.eta * params.p_max_kw * (s.t_depart - s.t_arrive) * params.dt_hours <
          demand)
        continue;
      ok = true;
      break;
    }
    if (!ok)
      throw std::runtime_error("sample_population: resample cap hit for PEV " +
                               std::to_string(i));
    s.validate(params.horizon, params.dt_hours);
    out.push_back(std::move(s));
  }
  return out;
}

Vector build_L(const Vector& baseload, const std::string& policy, double valley_level) {
  if (baseload.size() == 0) throw std::invalid_argument("build_L: empty baseload");
  if (baseload.minCoeff() < 0.0)
    throw std::invalid_argument("build_L: baseload must be nonnegative");
  if (policy == "headroom") {
    return (Vector::Constant(baseload.size(), baseload.maxCoeff()) - baseload).cwiseMax(0.0);
  }
  if (policy == "valley") {
    return (Vector::Constant(baseload.size(), valley_level) - baseload).cwiseMax(0.0);
  }
  throw std::invalid_argument("build_L: unknown policy " + policy);
}

GraphSchedule feeder_topology(const std::string& name, int n) {
  if (name == "ieee37") return static_schedule(36, ieee37_arcs());
  if (name == "alt37") return static_schedule(36, alt37_arcs());
  if (name == "ieee123") return static_schedule(122, feeder_tree_arcs(122, 30));
  if (name == "line") {
    if (n < 2) throw std::invalid_argument("line topology needs n >= 2");
    std::vector<Edge> arcs;
    for (int i = 0; i < n - 1; ++i) arcs.emplace_back(i, i + 1);
    return static_schedule(n, arcs);
  }
  if (name == "ring") {
    if (n < 3) throw std::invalid_argument("ring topology needs n >= 3");
    std::vector<Edge> arcs;
    for (int i = 0; i < n - 1; ++i) arcs.emplace_back(i, i + 1);
    arcs.emplace_back(n - 1, 0);
    return static_schedule(n, arcs);
  }
  throw std::invalid_argument("unknown topology: " + name);
}

GraphSchedule custom_topology(const std::string& edge_csv_path, int n) {
  std::ifstream in(edge_csv_path);
  if (!in) throw std::runtime_error("cannot open edge list: " + edge_csv_path);
  std::vector<Edge> arcs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.find("from") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw std::runtime_error("malformed edge row: " + line);
    arcs.emplace_back(std::stoi(a), std::stoi(b));
  }
  GraphSchedule g;
  g.n = n;
  g.phases.push_back(arcs);  // already directed as listed
  g.tbar = 1;
  return g;
}

Vector load_series_csv(const std::string& path, int horizon) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open series file: " + path);
  Vector out = Vector::Zero(horizon);
  std::string line;
  bool first = true;
  int filled = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first) {
      first = false;
      if (line.find("slot") != std::string::npos) continue;
    }
    std::stringstream ss(line);
    std::string slot, value;
    if (!std::getline(ss, slot, ',') || !std::getline(ss, value, ','))
      throw std::runtime_error("malformed series row: " + line);
    const int t = std::stoi(slot);
    if (t < 1 || t > horizon) throw std::runtime_error("slot out of range: " + line);
    out[t - 1] = std::stod(value);
    ++filled;
  }
  if (filled != horizon) throw std::runtime_error("series file missing slots: " + path);
  return out;
}

void save_series_csv(const std::string& path, const Vector& values,
                     const std::string& value_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write series file: " + path);
  out << "slot," << value_header << "\n";
  out.precision(17);
  for (int t = 0; t < values.size(); ++t) out << (t + 1) << ',' << values[t] << '\n';
}

ScenarioConfig load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  ScenarioConfig c;
  const json s = j.value("scenario", json::object());
  c.n = s.value("n", c.n);
  c.horizon = s.value("horizon", c.horizon);
  c.dt_hours = s.value("dt_hours", c.dt_hours);
  c.seed = s.value("seed", c.seed);
  c.topology = s.value("topology", c.topology);
  c.topology_file = s.value("topology_file", c.topology_file);
  if (s.contains("switching")) c.switching = s["switching"].get<std::vector<std::string>>();
  c.switch_every = s.value("switch_every", c.switch_every);
  c.tbar = s.value("tbar", c.tbar);
  c.prices_csv = s.value("prices_csv", c.prices_csv);
  c.baseload_csv = s.value("baseload_csv", c.baseload_csv);
  c.roster_csv = s.value("roster_csv", c.roster_csv);
  c.capacity_policy = s.value("capacity_policy", c.capacity_policy);
  c.valley_level = s.value("valley_level", c.valley_level);
  c.headroom_margin = s.value("headroom_margin", c.headroom_margin);
  c.capacity_scale = s.value("capacity_scale", c.capacity_scale);
  c.alpha = s.value("alpha", c.alpha);
  c.m_lo = s.value("m_lo", c.m_lo);
  c.m_hi = s.value("m_hi", c.m_hi);
  c.m_auto_scale = s.value("m_auto_scale", c.m_auto_scale);
  c.default_activation = s.value("default_activation", c.default_activation);
  if (s.contains("activation_overrides"))
    for (const auto& [key, val] : s["activation_overrides"].items())
      c.activation_overrides[std::stoi(key)] = val.get<long>();

  const json p = j.value("protocol", json::object());
  c.epsilon = p.value("epsilon", c.epsilon);
  c.rho = p.value("rho", c.rho);
  c.eps_active = p.value("eps_active", c.eps_active);
  c.max_cuts_factor = p.value("max_cuts_factor", c.max_cuts_factor);

  const json m = j.value("sim", json::object());
  c.q_delay = m.value("q_delay", c.q_delay);
  c.q_drop = m.value("q_drop", c.q_drop);
  c.delay_ticks = m.value("delay_ticks", c.delay_ticks);
  c.wake_dist = m.value("wake", json::object()).value("dist", c.wake_dist);
  c.wake_a = m.value("wake", json::object()).value("a", c.wake_a);
  c.wake_b = m.value("wake", json::object()).value("b", c.wake_b);
  c.sim_seed = m.value("seed", c.sim_seed);
  c.round_cap = m.value("round_cap", c.round_cap);
  return c;
}

std::string config_to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json s;
  s["n"] = c.n;
  s["horizon"] = c.horizon;
  s["dt_hours"] = c.dt_hours;
  s["seed"] = c.seed;
  s["topology"] = c.topology;
  if (!c.topology_file.empty()) s["topology_file"] = c.topology_file;
  if (!c.switching.empty()) s["switching"] = c.switching;
  s["switch_every"] = c.switch_every;
  s["tbar"] = c.tbar;
  if (!c.prices_csv.empty()) s["prices_csv"] = c.prices_csv;
  if (!c.baseload_csv.empty()) s["baseload_csv"] = c.baseload_csv;
  if (!c.roster_csv.empty()) s["roster_csv"] = c.roster_csv;
  s["capacity_policy"] = c.capacity_policy;
  s["valley_level"] = c.valley_level;
  s["headroom_margin"] = c.headroom_margin;
  s["capacity_scale"] = c.capacity_scale;
  s["alpha"] = c.alpha;
  s["m_lo"] = c.m_lo;
  s["m_hi"] = c.m_hi;
  s["m_auto_scale"] = c.m_auto_scale;
  s["default_activation"] = c.default_activation;
  nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
  for (const auto& [node, tick] : c.activation_overrides)
    overrides[std::to_string(node)] = tick;
  s["activation_overrides"] = overrides;

  nlohmann::ordered_json p;
  p["epsilon"] = c.epsilon;
  p["rho"] = c.rho;
  p["eps_active"] = c.eps_active;
  p["max_cuts_factor"] = c.max_cuts_factor;

  nlohmann::ordered_json m;
  m["q_delay"] = c.q_delay;
  m["q_drop"] = c.q_drop;
  m["delay_ticks"] = c.delay_ticks;
  m["wake"] = {{"dist", c.wake_dist}, {"a", c.wake_a}, {"b", c.wake_b}};
  m["seed"] = c.sim_seed;
  m["round_cap"] = c.round_cap;

  nlohmann::ordered_json root;
  root["scenario"] = s;
  root["protocol"] = p;
  root["sim"] = m;
  return root.dump(2);
}

Scenario build_scenario(const ScenarioConfig& config) {
  Scenario sc;
  sc.config = config;

  // Graph first: named topologies pin the roster size.
  if (!config.switching.empty()) {
    GraphSchedule first = config.topology_file.empty()
                              ? feeder_topology(config.switching.at(0), config.n)
                              : custom_topology(config.topology_file, config.n);
    GraphSchedule g;
    g.n = first.n;
    g.phases.push_back(first.phases.at(0));
    for (std::size_t i = 1; i < config.switching.size(); ++i) {
      GraphSchedule other = feeder_topology(config.switching[i], config.n);
      if (other.n != g.n)
        throw std::invalid_argument("switching topologies disagree on node count");
      g.phases.push_back(other.phases.at(0));
    }
    g.switch_every = config.switch_every;
    g.tbar = config.tbar;
    sc.graph = std::move(g);
  } else if (config.topology == "custom") {
    sc.graph = custom_topology(config.topology_file, config.n);
    sc.graph.tbar = config.tbar;
  } else {
    sc.graph = feeder_topology(config.topology, config.n);
    sc.graph.tbar = config.tbar;
  }
  const int n = sc.graph.n;

  sc.graph.activation.assign(static_cast<std::size_t>(n), config.default_activation);
  for (const auto& [node, tick] : config.activation_overrides) {
    if (node < 0 || node >= n)
      throw std::invalid_argument("activation override for unknown node");
    sc.graph.activation[static_cast<std::size_t>(node)] = tick;
  }

  // Instance.
  Vector price = config.prices_csv.empty()
                     ? default_price_curve()
                     : load_series_csv(config.prices_csv, config.horizon);
  if (price.size() != config.horizon)
    throw std::invalid_argument("price curve length != horizon");
  Vector household = config.baseload_csv.empty()
                         ? default_household_load()
                         : load_series_csv(config.baseload_csv, config.horizon);
  if (household.size() != config.horizon)
    throw std::invalid_argument("baseload length != horizon");
  sc.baseload = config.baseload_csv.empty() ? Vector(household * n) : household;

  CocInstance inst;
  inst.horizon = config.horizon;
  inst.dt_hours = config.dt_hours;
  if (!config.roster_csv.empty()) {
    inst.pevs = load_roster_csv(config.roster_csv, price);
    if (static_cast<int>(inst.pevs.size()) != n)
      throw std::invalid_argument("roster size != topology node count");
  } else {
    PopulationParams params;
    params.horizon = config.horizon;
    params.dt_hours = config.dt_hours;
    params.price = price;
    params.alpha = config.alpha;
    inst.pevs = sample_population(n, config.seed, params);
  }

  Vector L = build_L(sc.baseload, config.capacity_policy, config.valley_level);
  L = (L.array() + config.headroom_margin * sc.baseload.maxCoeff()).matrix();
  inst.capacity = L * config.capacity_scale;

  // i*: lowest id among the initially activated processors.
  int istar = -1;
  for (int i = 0; i < n; ++i) {
    if (sc.graph.activation_of(i) <= 0) {
      istar = inst.pevs[static_cast<std::size_t>(i)].id;
      break;
    }
  }
  if (istar < 0) throw std::invalid_argument("no processor activates at tick 0");
  inst.i_star = istar;
  inst.validate();
  if (!slater_check(inst))
    throw std::runtime_error(
        "scenario rejected: Slater certificate failed (capacity too tight)");
  sc.instance = std::move(inst);

  // Objective bounds: uniform draws, optionally rescaled so any feasible
  // charging plan's total cost stays below every M_i.
  double lo = config.m_lo, hi = config.m_hi;
  if (config.m_auto_scale) {
    const double bound = std::max(1.0, mode1_greedy(sc.instance).total_cost);
    lo = std::max(lo, 1.4 * bound);
    hi = std::max(hi, 1.9 * bound);
  }
  DetRng mrng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < n; ++i) sc.m_init.push_back(mrng.uniform(lo, hi));

  sc.graph_diameter = diameter(sc.graph);
  sc.criterion_window = sc.graph_diameter * std::max(1, config.tbar);
  return sc;
}

std::vector<ProcessorState> make_processors(const Scenario& scenario) {
  const auto& inst = scenario.instance;
  const int n = static_cast<int>(inst.pevs.size());
  std::vector<ProcessorState> procs;
  procs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& spec = inst.pevs[static_cast<std::size_t>(i)];
    ProcessorConfig cfg;
    cfg.id = spec.id;
    cfg.horizon = inst.horizon;
    cfg.n = n;
    cfg.u_index = i;
    cfg.m_init = scenario.m_init[static_cast<std::size_t>(i)];
    cfg.epsilon = scenario.config.epsilon;
    cfg.criterion_window = scenario.criterion_window;
    cfg.rho = scenario.config.rho;
    cfg.eps_active = scenario.config.eps_active;
    cfg.max_cuts = scenario.config.max_cuts_factor <= 0
                       ? 0
                       : static_cast<std::size_t>(scenario.config.max_cuts_factor) *
                             static_cast<std::size_t>(cfg.dim());
    cfg.is_istar = spec.id == inst.i_star;
    FeasibleRegion region(spec, inst.horizon, inst.dt_hours);
    procs.emplace_back(cfg, spec, region,
                       cfg.is_istar ? inst.capacity : Vector());
  }
  return procs;
}

RunConfig run_config_of(const ScenarioConfig& config) {
  RunConfig rc;
  rc.q_delay = config.q_delay;
  rc.q_drop = config.q_drop;
  rc.delay_ticks = config.delay_ticks;
  if (config.wake_dist == "fixed")
    rc.wake = {WakeDistribution::Kind::kFixed, config.wake_a, config.wake_a};
  else if (config.wake_dist == "uniform")
    rc.wake = {WakeDistribution::Kind::kUniform, config.wake_a, config.wake_b};
  else if (config.wake_dist == "exponential")
    rc.wake = {WakeDistribution::Kind::kExponential, config.wake_a, config.wake_a};
  else
    throw std::invalid_argument("unknown wake distribution: " + config.wake_dist);
  rc.seed = config.sim_seed;
  rc.round_cap = config.round_cap;
  return rc;
}

}  // namespace pevcp
