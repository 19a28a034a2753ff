#pragma once

#include <stdexcept>
#include <vector>

#include "pevcp/geometry.hpp"
#include "pevcp/model.hpp"

namespace pevcp {

/// The surrogate decision vector z = (pi, u): dual prices over the horizon
/// followed by one surrogate dual value per processor.
struct QueryPoint {
  Vector z;
  int horizon = 0;

  auto pi() const { return z.head(horizon); }
  auto u() const { return z.tail(z.size() - horizon); }
  int n() const { return static_cast<int>(z.size()) - horizon; }
};

/// Constant vector e = (0', 1')' selecting the u-components.
Vector e_vector(int horizon, int n);

struct OracleResult {
  double value = 0.0;    // U_i(pi)
  Vector argmin;         // p* in P_i
  bool shift_applied = false;  // -pi'L term included (i = i*)
};

/// Exact minimizer of sum_t (g_t p_t + (quad/2) p_t^2) over the box
/// [0, p_max] intersected with the energy interval, by bisection on the
/// energy multiplier (quad > 0) or sorted marginal-cost filling (quad = 0).
Vector solve_separable(const FeasibleRegion& region, const Vector& linear, double quad);

/// Local dual function U_i(pi) = min_{p in P_i} f_i(p) + pi'p, with the
/// -pi'L shift for the designated processor.
OracleResult dual_oracle(const PevSpec& spec, const FeasibleRegion& region,
                         const Vector& pi, bool is_istar, const Vector& capacity);

struct MasterResult {
  Vector z;
  double J = 0.0;
  std::vector<int> active;  // indices into the cut set
};

class MasterInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProjectionResult {
  Vector z;
  Vector lambda;            // one multiplier per constraint row
  std::vector<int> active;  // rows with |a'z - b| within tolerance
  double kkt_residual = 0.0;
};

/// Euclidean projection of y onto {z : A z <= b} by a primal-dual active
/// set iteration with a Hildreth fallback. Throws MasterInfeasibleError
/// when no point satisfying the constraints can be produced.
ProjectionResult project_onto_polyhedron(const Matrix& A, const Vector& b, const Vector& y);

/// Unique maximizer of e'z - rho||z||^2 over the induced polyhedron,
/// computed as the projection of e/(2 rho); J is the attained value.
MasterResult master_solve(const CutSet& s, double rho, int horizon);

struct RecoveryResult {
  std::vector<Vector> profiles;   // ordered like inst.pevs
  double aggregate_violation = 0.0;  // max_t max(0, sum_i p_t - L_t)
  bool tie_break_applied = false;    // alpha = 0 lexicographic fallback
};

/// Per-PEV best responses at pi_star; exact primal optimum when pi_star
/// is the exact dual optimum and alpha > 0.
RecoveryResult primal_recovery(const Vector& pi_star, const CocInstance& inst);

struct CentralizedResult {
  double j_star = 0.0;       // e'z - rho||z||^2 at the feasible surrogate point
  Vector z_star;             // (pi*, u = U_i(pi*))
  Vector pi_star;
  std::vector<Vector> profiles;
  double primal_cost = 0.0;  // sum_i f_i(p_i*)
  double dual_value = 0.0;   // sum_i U_i(pi*)
  double kkt_residual = 0.0;
  double aggregate_violation = 0.0;
};

/// Reference solution of the coordination problem: maximizes the dual over
/// pi >= 0 (projected gradient warm-up plus an active-set Newton polish on
/// the complementarity system), then recovers the primal. Throws when the
/// Slater certificate fails or the requested KKT tolerance is unreachable.
CentralizedResult centralized_solve(const CocInstance& inst, double tol, double rho = 1e-4);

}  // namespace pevcp
