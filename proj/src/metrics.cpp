#include "pevcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pevcp {

namespace {

using ordered_json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

ErrorSeries compute_errors(const RunTrace& trace, std::optional<double> j_star,
                           double epsilon) {
  ErrorSeries out;
  out.has_ground_truth = j_star.has_value();
  const auto Q = align_clocks(trace);
  const auto gaps = align_field(trace, &RoundRecord::u_gap);
  const int K = trace.criterion_window;

  // First tick at which every node has a value.
  long k_start = 0;
  for (const auto& row : Q) {
    long first = trace.ticks;
    for (long k = 0; k < trace.ticks; ++k)
      if (!std::isinf(row[static_cast<std::size_t>(k)])) {
        first = k;
        break;
      }
    k_start = std::max(k_start, first);
  }
  out.k_start = k_start;

  for (long k = k_start; k < trace.ticks; ++k) {
    double qmax = -std::numeric_limits<double>::infinity();
    double qmin = std::numeric_limits<double>::infinity();
    double e1 = 0.0, e3 = 0.0, e4 = -std::numeric_limits<double>::infinity();
    bool e3_defined = k - K >= k_start;
    for (int i = 0; i < trace.n; ++i) {
      const double q = Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      qmax = std::max(qmax, q);
      qmin = std::min(qmin, q);
      if (j_star) e1 = std::max(e1, std::abs(q - *j_star));
      if (e3_defined)
        e3 = std::max(e3, Q[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - K)] - q);
      e4 = std::max(e4, gaps[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    }
    out.e2.push_back(qmax - qmin);
    out.e1.push_back(j_star ? e1 : kNaN);
    out.e3.push_back(e3_defined ? e3 : kNaN);
    out.e4.push_back(e4);
    if (j_star && qmax - qmin < epsilon && e1 > 10.0 * epsilon)
      out.premature_consensus = true;
  }
  return out;
}

namespace {

ordered_json round_to_json(const RoundRecord& r) {
  ordered_json j;
  j["type"] = "round";
  j["k"] = r.k_global;
  j["node"] = r.node;
  j["k_local"] = r.k_local;
  j["J"] = r.J;
  j["z_norm"] = r.z_norm;
  j["u_gap"] = r.u_gap;
  j["cuts"] = r.cut_count;
  j["cond1"] = r.cond1;
  j["cond2"] = r.cond2;
  j["stopped"] = r.stopped;
  return j;
}

ordered_json message_to_json(const MessageRecord& m) {
  ordered_json j;
  j["type"] = "message";
  j["k"] = m.k_sent;
  j["from"] = m.from;
  j["to"] = m.to;
  j["version"] = m.version;
  j["dropped"] = m.dropped;
  j["delayed"] = m.delayed;
  j["visible_from"] = m.visible_from;
  j["bytes"] = m.bytes;
  return j;
}

}  // namespace

std::string trace_to_jsonl(const RunTrace& trace) {
  std::ostringstream out;
  ordered_json head;
  head["type"] = "header";
  head["n"] = trace.n;
  head["criterion_window"] = trace.criterion_window;
  head["ticks"] = trace.ticks;
  head["converged"] = trace.converged;
  head["first_all_stopped_tick"] = trace.first_all_stopped_tick;
  out << head.dump() << '\n';

  std::size_t ri = 0, mi = 0;
  while (ri < trace.rounds.size() || mi < trace.messages.size()) {
    const bool round_next =
        mi >= trace.messages.size() ||
        (ri < trace.rounds.size() &&
         trace.rounds[ri].k_global <= trace.messages[mi].k_sent);
    if (round_next)
      out << round_to_json(trace.rounds[ri++]).dump() << '\n';
    else
      out << message_to_json(trace.messages[mi++]).dump() << '\n';
  }
  return out.str();
}

RunTrace trace_from_jsonl(const std::string& text) {
  RunTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "header") {
      trace.n = j["n"].get<int>();
      trace.criterion_window = j["criterion_window"].get<int>();
      trace.ticks = j["ticks"].get<long>();
      trace.converged = j["converged"].get<bool>();
      trace.first_all_stopped_tick = j["first_all_stopped_tick"].get<long>();
      trace.final_J.assign(static_cast<std::size_t>(trace.n), kNaN);
      trace.final_local_clock.assign(static_cast<std::size_t>(trace.n), 0);
      trace.stop_tick.assign(static_cast<std::size_t>(trace.n), -1);
    } else if (type == "round") {
      RoundRecord r;
      r.node = j["node"].get<int>();
      r.k_global = j["k"].get<long>();
      r.k_local = j["k_local"].get<long>();
      r.J = j["J"].get<double>();
      r.z_norm = j["z_norm"].get<double>();
      r.u_gap = j["u_gap"].get<double>();
      r.cut_count = j["cuts"].get<int>();
      r.cond1 = j["cond1"].get<bool>();
      r.cond2 = j["cond2"].get<bool>();
      r.stopped = j["stopped"].get<bool>();
      trace.rounds.push_back(r);
      trace.final_J[static_cast<std::size_t>(r.node)] = r.J;
      trace.final_local_clock[static_cast<std::size_t>(r.node)] = r.k_local;
      if (r.stopped) trace.stop_tick[static_cast<std::size_t>(r.node)] = r.k_global;
    } else if (type == "message") {
      MessageRecord m;
      m.k_sent = j["k"].get<long>();
      m.from = j["from"].get<int>();
      m.to = j["to"].get<int>();
      m.version = j["version"].get<long>();
      m.dropped = j["dropped"].get<bool>();
      m.delayed = j["delayed"].get<bool>();
      m.visible_from = j["visible_from"].get<long>();
      m.bytes = j["bytes"].get<std::uint64_t>();
      trace.messages.push_back(m);
    }
  }
  return trace;
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentResult run_experiment(const Scenario& scenario) {
  ExperimentResult out;

  std::optional<CentralizedResult> central;
  try {
    central = centralized_solve(scenario.instance, 1e-6, scenario.config.rho);
  } catch (const std::exception&) {
    central.reset();  // e_I omitted downstream
  }
  out.centralized = central;

  auto processors = make_processors(scenario);
  out.trace = run(scenario.graph, processors, run_config_of(scenario.config));

  std::optional<double> j_star;
  if (central) j_star = central->j_star;
  out.errors = compute_errors(out.trace, j_star, scenario.config.epsilon);

  Vector total = Vector::Zero(scenario.instance.horizon);
  for (std::size_t i = 0; i < processors.size(); ++i) {
    const auto& proc = processors[i];
    if (proc.stopped()) {
      Vector p = proc.extract_profile();
      out.distributed_cost += cost(scenario.instance.pevs[i], p, scenario.instance.dt_hours);
      total += p;
      out.extracted_profiles.push_back(std::move(p));
    } else {
      out.extracted_profiles.emplace_back();
    }
  }
  out.distributed_violation = std::max(0.0, (total - scenario.instance.capacity).maxCoeff());

  out.trace_jsonl = trace_to_jsonl(out.trace);

  ordered_json s;
  s["schema_version"] = 1;
  s["n"] = out.trace.n;
  s["horizon"] = scenario.instance.horizon;
  s["criterion_window"] = scenario.criterion_window;
  s["graph_diameter"] = scenario.graph_diameter;
  s["converged"] = out.trace.converged;
  s["ticks"] = out.trace.ticks;
  s["rounds_total"] = out.trace.rounds.size();
  s["first_all_stopped_tick"] = out.trace.first_all_stopped_tick;
  s["j_star"] = central ? ordered_json(central->j_star) : ordered_json(nullptr);
  s["centralized_cost"] = central ? ordered_json(central->primal_cost) : ordered_json(nullptr);
  s["j_final"] = out.trace.final_J;
  s["final_local_clock"] = out.trace.final_local_clock;
  s["stop_tick"] = out.trace.stop_tick;
  s["distributed_cost"] = out.distributed_cost;
  s["distributed_violation"] = out.distributed_violation;
  double spread = 0.0;
  if (!out.errors.e2.empty()) spread = out.errors.e2.back();
  s["final_spread"] = spread;
  s["premature_consensus"] = out.errors.premature_consensus;
  s["messages"] = out.trace.messages.size();
  s["trace_hash"] = fnv1a_hash(out.trace_jsonl);
  s["config"] = nlohmann::ordered_json::parse(config_to_json(scenario.config));
  out.summary_json = s.dump(2);
  return out;
}

std::vector<BaselineRow> compare_baselines(const Scenario& scenario,
                                           const ExperimentResult& experiment) {
  std::vector<BaselineRow> rows;

  {
    BaselineRow r;
    r.name = "coordinated";
    r.total_cost = experiment.distributed_cost;
    r.max_violation = experiment.distributed_violation;
    r.rounds = *std::max_element(experiment.trace.final_local_clock.begin(),
                                 experiment.trace.final_local_clock.end());
    r.converged = experiment.trace.converged;
    rows.push_back(r);
  }
  if (experiment.centralized) {
    BaselineRow r;
    r.name = "centralized";
    r.total_cost = experiment.centralized->primal_cost;
    r.max_violation = experiment.centralized->aggregate_violation;
    r.rounds = 0;
    rows.push_back(r);
  }
  {
    const auto b = mode1_greedy(scenario.instance);
    rows.push_back({"mode1", b.total_cost, b.aggregate_violation, 0, true});
  }
  {
    const auto b = mode2_selfish(scenario.instance);
    rows.push_back({"mode2", b.total_cost, b.aggregate_violation, 0, true});
  }
  {
    const auto a = admm_solve(scenario.instance, 1.0, 1e-6, 20000);
    rows.push_back({"admm", a.total_cost, a.aggregate_violation, a.rounds, a.converged});
  }
  return rows;
}

std::string baseline_table_csv(const std::vector<BaselineRow>& rows) {
  std::ostringstream out;
  out << "strategy,total_cost,max_violation,rounds,converged\n";
  out.precision(12);
  for (const auto& r : rows)
    out << r.name << ',' << r.total_cost << ',' << r.max_violation << ',' << r.rounds << ','
        << (r.converged ? 1 : 0) << '\n';
  return out.str();
}

std::string errors_to_csv(const ErrorSeries& e) {
  std::ostringstream out;
  out << "k,e1,e2,e3,e4\n";
  out.precision(12);
  for (std::size_t i = 0; i < e.e2.size(); ++i) {
    out << (e.k_start + static_cast<long>(i)) << ',';
    if (std::isnan(e.e1[i]))
      out << ',';
    else
      out << e.e1[i] << ',';
    out << e.e2[i] << ',';
    if (std::isnan(e.e3[i]))
      out << ',';
    else
      out << e.e3[i] << ',';
    out << e.e4[i] << '\n';
  }
  return out.str();
}

}  // namespace pevcp
