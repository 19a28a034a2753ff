#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pevcp/baselines.hpp"
#include "pevcp/netsim.hpp"
#include "pevcp/scenario.hpp"
#include "pevcp/solvers.hpp"

namespace pevcp {

/// The four error series of the evaluation, resampled onto the global
/// clock. Entries are NaN where a series is not yet defined (before every
/// node produced a value, or within the first K ticks for e_III).
struct ErrorSeries {
  long k_start = 0;  // global tick of index 0
  std::vector<double> e1;  // max_i |J_i(k) - J*|; empty without ground truth
  std::vector<double> e2;  // max_{i,j} |J_i(k) - J_j(k)|
  std::vector<double> e3;  // max_i (J_i(k-K) - J_i(k))
  std::vector<double> e4;  // max_i (u_i(k) - U_i(pi_i(k)))
  bool has_ground_truth = false;
  // e2 below epsilon while e1 stays above 10*epsilon: consensus on a
  // non-optimal value.
  bool premature_consensus = false;
};

ErrorSeries compute_errors(const RunTrace& trace, std::optional<double> j_star,
                           double epsilon);

std::string trace_to_jsonl(const RunTrace& trace);
RunTrace trace_from_jsonl(const std::string& text);

std::uint64_t fnv1a_hash(const std::string& bytes);

struct BaselineRow {
  std::string name;
  double total_cost = 0.0;
  double max_violation = 0.0;
  long rounds = 0;
  bool converged = true;
};

struct ExperimentResult {
  RunTrace trace;
  ErrorSeries errors;
  std::optional<CentralizedResult> centralized;
  std::vector<Vector> extracted_profiles;  // empty for unconverged nodes
  double distributed_cost = 0.0;
  double distributed_violation = 0.0;
  std::string summary_json;
  std::string trace_jsonl;
};

/// Full pipeline: simulate, align, compute errors, extract profiles and
/// build the summary document. Ground truth is embedded unless the
/// centralized solve fails.
ExperimentResult run_experiment(const Scenario& scenario);

/// Coordinated (from a finished experiment), centralized, mode (i),
/// mode (ii) and ADMM side by side.
std::vector<BaselineRow> compare_baselines(const Scenario& scenario,
                                           const ExperimentResult& experiment);

std::string baseline_table_csv(const std::vector<BaselineRow>& rows);
std::string errors_to_csv(const ErrorSeries& errors);

}  // namespace pevcp
