#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "pevcp/geometry.hpp"
#include "pevcp/model.hpp"
#include "pevcp/solvers.hpp"

namespace pevcp {

struct ProcessorConfig {
  int id = 0;
  int horizon = 0;      // T
  int n = 0;            // roster size; z lives in R^{T+n}
  int u_index = 0;      // this processor's u-component, 0-based
  double m_init = 0.0;  // objective bound M_i
  double epsilon = 1e-4;
  int criterion_window = 1;  // K = d_G * Tbar
  double rho = 1e-4;
  double eps_active = 1e-7;
  std::size_t max_cuts = 0;  // 0 = unlimited
  bool is_istar = false;

  int dim() const { return horizon + n; }
};

/// Per-PEV state machine: local cut set, last query point, J history and
/// the localized stopping flags. One executor mutates a state at a time;
/// inbound sets are immutable snapshots.
class ProcessorState {
 public:
  ProcessorState(ProcessorConfig config, PevSpec spec, FeasibleRegion region,
                 Vector capacity_if_istar);

  const ProcessorConfig& config() const { return cfg_; }
  const CutSet& cut_set() const { return cuts_; }
  long local_clock() const { return static_cast<long>(j_history_.size()); }
  long version() const { return version_; }  // bumps on any cut-set change
  const std::vector<double>& j_history() const { return j_history_; }
  double last_J() const { return j_history_.empty() ? std::numeric_limits<double>::infinity()
                                                    : j_history_.back(); }
  const Vector& last_z() const { return z_; }
  double last_u_gap() const { return u_gap_; }
  bool cond1() const { return cond1_; }
  bool cond2() const { return cond2_; }
  bool stopped() const { return stopped_; }
  void resume() { stopped_ = false; }

  /// H_tmp: union of the neighbors' snapshots with the local set.
  CutSet read_phase(const std::vector<const CutSet*>& neighbor_sets) const;

  /// Oracle comparison at the query point; empty cut when z is already
  /// inside Z_i, otherwise the separating half-space of Definition 1.
  struct CutGen {
    CutPlane cut;
    double u_gap = 0.0;  // u_i - U_i(pi)
  };
  CutGen generate_cut(const QueryPoint& z) const;

  /// One full local round: read, master solve, prune, cut, write.
  /// Returns the new output snapshot.
  std::shared_ptr<const CutSet> iterate(const std::vector<const CutSet*>& inbound);

  /// Conditions 1-2 on the current state.
  bool local_criterion() const { return cond1_ && cond2_; }

  /// Merges inbound sets without recomputing the master. Returns true when
  /// the stored query point got cut off, i.e. the processor must resume.
  bool absorb(const std::vector<const CutSet*>& inbound);

  std::shared_ptr<const CutSet> snapshot() const { return snapshot_; }

  /// Charging profile extracted from the final prices; requires stopped.
  Vector extract_profile() const;

  OracleResult run_oracle(const Vector& pi) const;

 private:
  void publish();

  ProcessorConfig cfg_;
  PevSpec spec_;
  FeasibleRegion region_;
  Vector capacity_;  // nonempty only on i*
  CutSet cuts_;
  std::shared_ptr<const CutSet> snapshot_;
  Vector z_;
  std::vector<double> j_history_;
  double u_gap_ = std::numeric_limits<double>::infinity();
  long version_ = 0;
  bool cond1_ = false;
  bool cond2_ = false;
  bool stopped_ = false;
};

/// H(0) = {e'z <= M_i} plus the pi-nonnegativity cuts.
ProcessorState initialize(const ProcessorConfig& config, const PevSpec& spec,
                          const FeasibleRegion& region, const Vector& capacity_if_istar);

}  // namespace pevcp
