#pragma once

#include <vector>

#include "pevcp/model.hpp"

namespace pevcp {

struct BaselineResult {
  std::vector<Vector> profiles;
  double total_cost = 0.0;
  double aggregate_violation = 0.0;  // max_t max(0, sum_i p_t - L_t)
};

/// Mode (i): charge at full power from arrival until the energy demand is
/// met, fractional last slot; the capacity limit is ignored.
BaselineResult mode1_greedy(const CocInstance& inst);

/// Mode (ii): each PEV minimizes its own cost over P_i; the capacity
/// limit is ignored (best response at pi = 0).
BaselineResult mode2_selfish(const CocInstance& inst);

struct AdmmResult {
  std::vector<Vector> profiles;
  double total_cost = 0.0;
  double aggregate_violation = 0.0;
  std::vector<double> objective_series;  // total cost per iteration
  long rounds = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Sharing-form ADMM reference for the same coordination problem:
/// per-PEV proximal steps over P_i, aggregate projection onto the
/// capacity set, scaled dual update, residual-balancing step size.
AdmmResult admm_solve(const CocInstance& inst, double rho_admm, double tol, long max_iters);

}  // namespace pevcp
