#include "pevcp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pevcp/solvers.hpp"

namespace pevcp {

namespace {

double violation(const std::vector<Vector>& profiles, const CocInstance& inst) {
  Vector total = Vector::Zero(inst.horizon);
  for (const auto& p : profiles) total += p;
  return std::max(0.0, (total - inst.capacity).maxCoeff());
}

double total_cost_of(const std::vector<Vector>& profiles, const CocInstance& inst) {
  double c = 0.0;
  for (std::size_t i = 0; i < profiles.size(); ++i)
    c += cost(inst.pevs[i], profiles[i], inst.dt_hours);
  return c;
}

}  // namespace

BaselineResult mode1_greedy(const CocInstance& inst) {
  inst.validate();
  BaselineResult out;
  for (const auto& spec : inst.pevs) {
    FeasibleRegion region(spec, inst.horizon, inst.dt_hours);
    Vector p = Vector::Zero(inst.horizon);
    double remaining = region.e_min();
    for (int t = spec.t_arrive; t <= spec.t_depart && remaining > 1e-15; ++t) {
      const double energy = std::min(remaining, spec.p_max_kw * inst.dt_hours);
      p[t - 1] = energy / inst.dt_hours;
      remaining -= energy;
    }
    out.profiles.push_back(std::move(p));
  }
  out.total_cost = total_cost_of(out.profiles, inst);
  out.aggregate_violation = violation(out.profiles, inst);
  return out;
}

BaselineResult mode2_selfish(const CocInstance& inst) {
  inst.validate();
  BaselineResult out;
  const Vector zero_pi = Vector::Zero(inst.horizon);
  for (const auto& spec : inst.pevs) {
    FeasibleRegion region(spec, inst.horizon, inst.dt_hours);
    out.profiles.push_back(dual_oracle(spec, region, zero_pi, false, Vector()).argmin);
  }
  out.total_cost = total_cost_of(out.profiles, inst);
  out.aggregate_violation = violation(out.profiles, inst);
  return out;
}

AdmmResult admm_solve(const CocInstance& inst, double rho_admm, double tol, long max_iters) {
  inst.validate();
  if (!slater_check(inst))
    throw std::runtime_error("admm_solve: Slater certificate failed");
  if (!(rho_admm > 0.0)) throw std::invalid_argument("admm_solve: rho must be > 0");

  const int T = inst.horizon;
  const int n = static_cast<int>(inst.pevs.size());
  std::vector<FeasibleRegion> regions;
  for (const auto& spec : inst.pevs) regions.emplace_back(spec, T, inst.dt_hours);

  std::vector<Vector> p(static_cast<std::size_t>(n), Vector::Zero(T));
  Vector mean_p = Vector::Zero(T);
  Vector mean_s = Vector::Zero(T);
  Vector v = Vector::Zero(T);  // scaled dual
  double rho = rho_admm;

  AdmmResult out;
  for (long it = 0; it < max_iters; ++it) {
    // Per-PEV proximal step: min f_i(p) + (rho/2)||p - p_i + mean_p - mean_s + v||^2.
    Vector new_mean_p = Vector::Zero(T);
    for (int i = 0; i < n; ++i) {
      const auto& spec = inst.pevs[static_cast<std::size_t>(i)];
      const Vector w = p[static_cast<std::size_t>(i)] - mean_p + mean_s - v;
      const Vector g = spec.price * inst.dt_hours - rho * w;
      p[static_cast<std::size_t>(i)] =
          solve_separable(regions[static_cast<std::size_t>(i)], g, spec.alpha + rho);
      new_mean_p += p[static_cast<std::size_t>(i)];
    }
    new_mean_p /= n;

    // Aggregate projection onto {s : n*s <= L}.
    const Vector target = new_mean_p + v;
    const Vector new_mean_s = target.cwiseMin(inst.capacity / n);
    v += new_mean_p - new_mean_s;

    const double primal_res = std::sqrt(n) * (new_mean_p - new_mean_s).norm();
    const double dual_res = rho * std::sqrt(n) * (new_mean_s - mean_s).norm();
    mean_p = new_mean_p;
    mean_s = new_mean_s;
    out.objective_series.push_back(total_cost_of(p, inst));
    out.rounds = it + 1;
    out.primal_residual = primal_res;
    out.dual_residual = dual_res;
    if (primal_res <= tol && dual_res <= tol) {
      out.converged = true;
      break;
    }
    // Residual balancing keeps the two residuals comparable.
    if (primal_res > 10.0 * dual_res)
      rho = std::min(rho * 2.0, 1e8), v /= 2.0;
    else if (dual_res > 10.0 * primal_res)
      rho = std::max(rho / 2.0, 1e-8), v *= 2.0;
  }

  out.profiles = p;
  out.total_cost = total_cost_of(p, inst);
  out.aggregate_violation = violation(p, inst);
  return out;
}

}  // namespace pevcp
