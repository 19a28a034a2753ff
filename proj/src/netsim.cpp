#include "pevcp/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>

namespace pevcp {

const std::vector<Edge>& GraphSchedule::edges_at(long k) const {
  if (phases.empty()) throw std::logic_error("graph schedule has no phases");
  std::size_t phase;
  const long step = std::max<long>(1, switch_every);
  if (!script.empty()) {
    phase = static_cast<std::size_t>(script[static_cast<std::size_t>(
        (k / step) % static_cast<long>(script.size()))]);
  } else {
    phase = static_cast<std::size_t>((k / step) % static_cast<long>(phases.size()));
  }
  return phases[phase];
}

long GraphSchedule::period_ticks() const {
  const long step = std::max<long>(1, switch_every);
  const long cycle = script.empty() ? static_cast<long>(phases.size())
                                    : static_cast<long>(script.size());
  return step * std::max<long>(1, cycle);
}

namespace {

std::vector<std::vector<int>> adjacency(int n, const std::set<Edge>& edges, bool reverse) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (reverse)
      adj[static_cast<std::size_t>(b)].push_back(a);
    else
      adj[static_cast<std::size_t>(a)].push_back(b);
  }
  return adj;
}

std::vector<int> bfs_dist(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<int> q;
  dist[static_cast<std::size_t>(src)] = 0;
  q.push(src);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(w)] < 0) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

bool strongly_connected(int n, const std::set<Edge>& edges) {
  if (n <= 1) return true;
  const auto fwd = bfs_dist(adjacency(n, edges, false), 0);
  const auto bwd = bfs_dist(adjacency(n, edges, true), 0);
  for (int v = 0; v < n; ++v)
    if (fwd[static_cast<std::size_t>(v)] < 0 || bwd[static_cast<std::size_t>(v)] < 0)
      return false;
  return true;
}

std::set<Edge> window_union(const GraphSchedule& s, long start, long len) {
  std::set<Edge> out;
  for (long k = start; k < start + len; ++k)
    for (const auto& e : s.edges_at(k)) out.insert(e);
  return out;
}

struct DetRng {
  std::mt19937_64 eng;
  explicit DetRng(std::uint64_t seed) : eng(seed) {}
  double uniform01() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  double sample(const WakeDistribution& w) {
    switch (w.kind) {
      case WakeDistribution::Kind::kFixed:
        return std::max(w.a, 1e-9);
      case WakeDistribution::Kind::kUniform:
        return std::max(w.a + (w.b - w.a) * uniform01(), 1e-9);
      case WakeDistribution::Kind::kExponential: {
        const double u = uniform01();
        return std::clamp(-w.a * std::log1p(-u), 1e-6 * w.a, 50.0 * w.a);
      }
    }
    return 1.0;
  }
};

std::uint64_t wire_bytes(const CutSet& s) {
  std::uint64_t bytes = 20;
  for (const auto& c : s.cuts()) bytes += 25 + 8 * static_cast<std::uint64_t>(c.a.size());
  return bytes;
}

struct InboxEntry {
  std::shared_ptr<const CutSet> snap;
  long version = 0;
  long visible_from = 0;
};

}  // namespace

int diameter(const GraphSchedule& schedule) {
  const long period = schedule.period_ticks();
  const long tbar = std::max(1, schedule.tbar);
  // Persistent edges: present in every tbar-window across one period of
  // window alignments.
  std::set<Edge> persistent = window_union(schedule, 0, tbar);
  for (long s = 1; s < period; ++s) {
    const std::set<Edge> w = window_union(schedule, s * tbar, tbar);
    std::set<Edge> kept;
    std::set_intersection(persistent.begin(), persistent.end(), w.begin(), w.end(),
                          std::inserter(kept, kept.begin()));
    persistent = std::move(kept);
  }

  const auto adj = adjacency(schedule.n, persistent, false);
  int diam = 0;
  for (int src = 0; src < schedule.n; ++src) {
    const auto dist = bfs_dist(adj, src);
    for (int v = 0; v < schedule.n; ++v) {
      if (dist[static_cast<std::size_t>(v)] < 0)
        throw std::runtime_error("persistent graph not strongly connected: no path " +
                                 std::to_string(src) + " -> " + std::to_string(v));
      diam = std::max(diam, dist[static_cast<std::size_t>(v)]);
    }
  }
  return diam;
}

bool verify_Tbar(const GraphSchedule& schedule, int tbar, long horizon) {
  if (tbar < 1 || horizon < tbar) throw std::invalid_argument("verify_Tbar: bad window");
  for (long s = 0; (s + 1) * tbar <= horizon; ++s) {
    if (!strongly_connected(schedule.n, window_union(schedule, s * tbar, tbar)))
      return false;
  }
  return true;
}

namespace {

class EventSim {
 public:
  EventSim(const GraphSchedule& schedule, std::vector<ProcessorState>& procs,
           const RunConfig& cfg)
      : schedule_(schedule), procs_(procs), cfg_(cfg), rng_(cfg.seed) {
    n_ = schedule.n;
    if (static_cast<int>(procs.size()) != n_)
      throw std::invalid_argument("run: processor count != schedule node count");
    inbox_.assign(static_cast<std::size_t>(n_) * n_, {});
    current_view_.assign(static_cast<std::size_t>(n_) * n_, nullptr);
    last_delivered_.assign(static_cast<std::size_t>(n_) * n_, -1);
    dirty_.assign(static_cast<std::size_t>(n_), false);
    scheduled_.assign(static_cast<std::size_t>(n_), false);
    for (const auto& phase : schedule.phases)
      for (const auto& e : phase) all_edges_.insert(e);
    bool any_immediate = false;
    for (int i = 0; i < n_; ++i) any_immediate |= schedule.activation_of(i) <= 0;
    if (!any_immediate)
      throw std::invalid_argument("run: at least one node must activate at tick 0");
  }

  RunTrace execute() {
    RunTrace trace;
    trace.n = n_;
    trace.criterion_window = procs_.empty() ? 0 : procs_[0].config().criterion_window;
    schedule_initial_wakes(0);

    long last_busy_tick = -1;
    while (!events_.empty()) {
      if (tick_ >= cfg_.round_cap) break;
      const auto [t, node] = *events_.begin();
      events_.erase(events_.begin());
      const long k = tick_++;
      process_wake(node, t, k, trace);
      schedule_initial_wakes(tick_);
      if (!quiescent()) last_busy_tick = k;
      if (all_activated() && quiescent()) {
        trace.converged = true;
        trace.first_all_stopped_tick = last_busy_tick + 1;
        break;
      }
    }

    trace.ticks = tick_;
    for (int i = 0; i < n_; ++i) {
      trace.final_J.push_back(procs_[static_cast<std::size_t>(i)].last_J());
      trace.final_local_clock.push_back(procs_[static_cast<std::size_t>(i)].local_clock());
      trace.final_z.push_back(procs_[static_cast<std::size_t>(i)].last_z());
      trace.stop_tick.push_back(stop_tick_.count(i) ? stop_tick_[i] : -1);
    }
    return trace;
  }

 private:
  std::vector<InboxEntry>& inbox(int to, int from) {
    return inbox_[static_cast<std::size_t>(to) * n_ + from];
  }
  long& last_delivered(int from, int to) {
    return last_delivered_[static_cast<std::size_t>(from) * n_ + to];
  }

  void schedule_initial_wakes(long now_tick) {
    for (int i = 0; i < n_; ++i) {
      if (scheduled_[static_cast<std::size_t>(i)]) continue;
      if (schedule_.activation_of(i) <= now_tick) {
        events_.insert({now_time_ + rng_.sample(cfg_.wake), i});
        scheduled_[static_cast<std::size_t>(i)] = true;
      }
    }
  }

  // Latest visible snapshot per in-neighbor; older visible entries are
  // discarded, future-visible ones kept.
  std::vector<const CutSet*> collect_visible(int node, long k) {
    std::vector<const CutSet*> views;
    for (int from = 0; from < n_; ++from) {
      auto& entries = inbox(node, from);
      if (entries.empty()) continue;
      int best = -1;
      for (std::size_t e = 0; e < entries.size(); ++e)
        if (entries[e].visible_from <= k) best = static_cast<int>(e);
      if (best >= 0) {
        current_view_[static_cast<std::size_t>(node) * n_ + from] =
            entries[static_cast<std::size_t>(best)].snap;
        entries.erase(entries.begin(), entries.begin() + best + 1);
      }
      const auto& held = current_view_[static_cast<std::size_t>(node) * n_ + from];
      if (held) views.push_back(held.get());
    }
    dirty_[static_cast<std::size_t>(node)] = false;
    for (int from = 0; from < n_; ++from)
      if (!inbox(node, from).empty()) dirty_[static_cast<std::size_t>(node)] = true;
    return views;
  }

  void push_snapshots(int node, long k, RunTrace& trace) {
    auto& proc = procs_[static_cast<std::size_t>(node)];
    for (const auto& [from, to] : schedule_.edges_at(k)) {
      if (from != node) continue;
      if (last_delivered(from, to) == proc.version()) continue;
      const bool dropped = rng_.uniform01() < cfg_.q_drop;
      bool delayed = false;
      long visible_from = k + 1;
      if (!dropped && rng_.uniform01() < cfg_.q_delay) {
        delayed = true;
        visible_from += cfg_.delay_ticks;
      }
      if (cfg_.log_messages)
        trace.messages.push_back({k, from, to, proc.version(), dropped, delayed,
                                  visible_from, wire_bytes(*proc.snapshot())});
      if (dropped) continue;
      inbox(to, from).push_back({proc.snapshot(), proc.version(), visible_from});
      last_delivered(from, to) = proc.version();
      dirty_[static_cast<std::size_t>(to)] = true;
    }
  }

  void process_wake(int node, double t, long k, RunTrace& trace) {
    now_time_ = t;
    auto& proc = procs_[static_cast<std::size_t>(node)];
    const auto views = collect_visible(node, k);

    if (proc.stopped()) {
      const bool resumed = !views.empty() && proc.absorb(views);
      if (resumed) {
        proc.resume();
        proc.iterate({});
        record_round(node, k, trace);
        if (proc.stopped()) stop_tick_[node] = k;
      }
    } else {
      proc.iterate(views);
      record_round(node, k, trace);
      if (proc.stopped()) stop_tick_[node] = k;
    }

    push_snapshots(node, k, trace);
    events_.insert({t + rng_.sample(cfg_.wake), node});
  }

  void record_round(int node, long k, RunTrace& trace) {
    const auto& proc = procs_[static_cast<std::size_t>(node)];
    RoundRecord r;
    r.node = node;
    r.k_global = k;
    r.k_local = proc.local_clock();
    r.J = proc.last_J();
    r.z_norm = proc.last_z().norm();
    r.u_gap = proc.last_u_gap();
    r.cut_count = static_cast<int>(proc.cut_set().size());
    r.cond1 = proc.cond1();
    r.cond2 = proc.cond2();
    r.stopped = proc.stopped();
    trace.rounds.push_back(r);
  }

  bool all_activated() const {
    for (int i = 0; i < n_; ++i)
      if (!scheduled_[static_cast<std::size_t>(i)]) return false;
    return true;
  }

  bool quiescent() {
    for (int i = 0; i < n_; ++i) {
      if (!scheduled_[static_cast<std::size_t>(i)]) return false;
      if (!procs_[static_cast<std::size_t>(i)].stopped()) return false;
      if (dirty_[static_cast<std::size_t>(i)]) return false;
    }
    for (const auto& [from, to] : all_edges_) {
      if (last_delivered_[static_cast<std::size_t>(from) * n_ + to] !=
          procs_[static_cast<std::size_t>(from)].version())
        return false;
    }
    return true;
  }

  const GraphSchedule& schedule_;
  std::vector<ProcessorState>& procs_;
  RunConfig cfg_;
  DetRng rng_;
  int n_ = 0;
  long tick_ = 0;
  double now_time_ = 0.0;
  std::set<std::pair<double, int>> events_;
  std::vector<std::vector<InboxEntry>> inbox_;
  std::vector<std::shared_ptr<const CutSet>> current_view_;
  std::vector<long> last_delivered_;
  std::vector<bool> dirty_;
  std::vector<bool> scheduled_;
  std::set<Edge> all_edges_;
  std::map<int, long> stop_tick_;
};

}  // namespace

RunTrace run(const GraphSchedule& schedule, std::vector<ProcessorState>& processors,
             const RunConfig& config) {
  EventSim sim(schedule, processors, config);
  return sim.execute();
}

RunTrace run_synchronous(const GraphSchedule& schedule,
                         std::vector<ProcessorState>& processors, long round_cap) {
  const int n = schedule.n;
  if (static_cast<int>(processors.size()) != n)
    throw std::invalid_argument("run_synchronous: processor count != node count");
  RunTrace trace;
  trace.n = n;
  trace.criterion_window = processors.empty() ? 0 : processors[0].config().criterion_window;
  std::vector<long> stop_tick(static_cast<std::size_t>(n), -1);
  long k = 0;
  long last_busy = -1;
  bool done = false;

  while (!done && k < round_cap) {
    for (int i = 0; i < n && k < round_cap; ++i, ++k) {
      auto& proc = processors[static_cast<std::size_t>(i)];
      std::vector<const CutSet*> views;
      std::vector<std::shared_ptr<const CutSet>> held;
      for (const auto& [from, to] : schedule.edges_at(k)) {
        if (to != i) continue;
        held.push_back(processors[static_cast<std::size_t>(from)].snapshot());
        views.push_back(held.back().get());
      }
      bool acted = false;
      if (proc.stopped()) {
        if (!views.empty() && proc.absorb(views)) {
          proc.resume();
          proc.iterate({});
          acted = true;
        }
      } else {
        proc.iterate(views);
        acted = true;
      }
      if (acted) {
        RoundRecord r;
        r.node = i;
        r.k_global = k;
        r.k_local = proc.local_clock();
        r.J = proc.last_J();
        r.z_norm = proc.last_z().norm();
        r.u_gap = proc.last_u_gap();
        r.cut_count = static_cast<int>(proc.cut_set().size());
        r.cond1 = proc.cond1();
        r.cond2 = proc.cond2();
        r.stopped = proc.stopped();
        trace.rounds.push_back(r);
        if (proc.stopped()) stop_tick[static_cast<std::size_t>(i)] = k;
        last_busy = k;
      }
      if (!proc.stopped()) last_busy = k;
    }
    // Quiescent once a full sweep leaves every node stopped with nothing
    // new absorbed.
    done = true;
    for (int i = 0; i < n; ++i)
      if (!processors[static_cast<std::size_t>(i)].stopped()) done = false;
    if (done) {
      bool changed = false;
      for (int i = 0; i < n && !changed; ++i) {
        auto& proc = processors[static_cast<std::size_t>(i)];
        std::vector<const CutSet*> views;
        std::vector<std::shared_ptr<const CutSet>> held;
        for (const auto& [from, to] : schedule.edges_at(k)) {
          if (to != i) continue;
          held.push_back(processors[static_cast<std::size_t>(from)].snapshot());
          views.push_back(held.back().get());
        }
        const std::size_t before = proc.cut_set().size();
        if (!views.empty() && proc.absorb(views)) {
          proc.resume();
          changed = true;
        } else if (proc.cut_set().size() != before) {
          changed = true;
        }
      }
      if (changed) done = false;
    }
  }

  trace.ticks = k;
  trace.converged = done;
  trace.first_all_stopped_tick = done ? last_busy + 1 : -1;
  for (int i = 0; i < n; ++i) {
    const auto& proc = processors[static_cast<std::size_t>(i)];
    trace.final_J.push_back(proc.last_J());
    trace.final_local_clock.push_back(proc.local_clock());
    trace.final_z.push_back(proc.last_z());
    trace.stop_tick.push_back(stop_tick[static_cast<std::size_t>(i)]);
  }
  return trace;
}

std::vector<std::vector<double>> align_field(const RunTrace& trace,
                                             double RoundRecord::*field) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> out(
      static_cast<std::size_t>(trace.n),
      std::vector<double>(static_cast<std::size_t>(trace.ticks), inf));
  for (const auto& r : trace.rounds)
    out[static_cast<std::size_t>(r.node)][static_cast<std::size_t>(r.k_global)] = r.*field;
  for (auto& row : out)  // step function: hold the last value
    for (std::size_t k = 1; k < row.size(); ++k)
      if (std::isinf(row[k]) && !std::isinf(row[k - 1])) row[k] = row[k - 1];
  return out;
}

std::vector<std::vector<double>> align_clocks(const RunTrace& trace) {
  return align_field(trace, &RoundRecord::J);
}

}  // namespace pevcp
