#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pevcp/processor.hpp"

namespace pevcp {

using Edge = std::pair<int, int>;  // directed: first -> second

/// Time-varying digraph: one or more edge-set phases cycled over the
/// global clock, plus per-node activation ticks for plug-and-play.
struct GraphSchedule {
  int n = 0;
  std::vector<std::vector<Edge>> phases;
  long switch_every = 1;       // global ticks per phase step
  std::vector<int> script;     // optional explicit phase order, cycled
  int tbar = 1;                // claimed connectivity window
  std::vector<long> activation;  // activation tick per node; empty = all at 0

  const std::vector<Edge>& edges_at(long k) const;
  long period_ticks() const;
  long activation_of(int node) const {
    return activation.empty() ? 0 : activation[static_cast<std::size_t>(node)];
  }
};

/// Diameter of the persistent graph (edges present in every
/// tbar-window of one schedule period). Throws when that graph is not
/// strongly connected, naming a disconnected pair.
int diameter(const GraphSchedule& schedule);

/// Assumption check: every [s*tbar, (s+1)*tbar) window unions to a
/// strongly connected digraph over the given horizon.
bool verify_Tbar(const GraphSchedule& schedule, int tbar, long horizon);

struct WakeDistribution {
  enum class Kind { kFixed, kUniform, kExponential };
  Kind kind = Kind::kFixed;
  double a = 1.0;  // fixed value / uniform lo / exponential mean
  double b = 1.0;  // uniform hi
};

struct RunConfig {
  double q_delay = 0.0;
  double q_drop = 0.0;
  int delay_ticks = 1;
  WakeDistribution wake;
  std::uint64_t seed = 0;
  long round_cap = 200000;
  bool log_messages = true;
};

struct RoundRecord {
  int node = 0;
  long k_global = 0;
  long k_local = 0;
  double J = 0.0;
  double z_norm = 0.0;
  double u_gap = 0.0;
  int cut_count = 0;
  bool cond1 = false;
  bool cond2 = false;
  bool stopped = false;
};

struct MessageRecord {
  long k_sent = 0;
  int from = 0;
  int to = 0;
  long version = 0;
  bool dropped = false;
  bool delayed = false;
  long visible_from = 0;
  std::uint64_t bytes = 0;
};

struct RunTrace {
  int n = 0;
  int criterion_window = 0;  // K used by the processors
  long ticks = 0;
  bool converged = false;
  long first_all_stopped_tick = -1;  // first tick from which every
                                     // activated node stayed stopped
  std::vector<RoundRecord> rounds;
  std::vector<MessageRecord> messages;
  std::vector<double> final_J;
  std::vector<long> final_local_clock;
  std::vector<long> stop_tick;     // -1 when a node never stopped
  std::vector<Vector> final_z;
};

/// Event loop over independent local clocks. Each wake advances the
/// global clock by one tick; snapshots sent during tick k become visible
/// at k+1 (k+1+delay_ticks when delayed), and dropped sends are retried
/// because every wake re-pushes versions a receiver has not seen yet.
/// Terminates when every activated processor satisfies the local
/// criterion and no unexamined snapshot remains, or at the round cap.
RunTrace run(const GraphSchedule& schedule, std::vector<ProcessorState>& processors,
             const RunConfig& config);

/// Gauss-Seidel reference: one deterministic sweep in node order per
/// round, reading current caches. Fault-free event runs with identical
/// fixed wake intervals must match its final objectives.
RunTrace run_synchronous(const GraphSchedule& schedule,
                         std::vector<ProcessorState>& processors, long round_cap);

/// Step-resampling of a per-round field onto the global clock; entries
/// before a node's first round are +infinity.
std::vector<std::vector<double>> align_clocks(const RunTrace& trace);
std::vector<std::vector<double>> align_field(const RunTrace& trace,
                                             double RoundRecord::*field);

}  // namespace pevcp
