#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace pevcp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One PEV's private battery and availability data. Slot indices are
/// 1-based; the charging window covers slots t with t_arrive <= t < t_depart.
struct PevSpec {
  int id = 0;
  double cap_kwh = 0.0;
  double soc_start = 0.0;
  double soc_target = 0.0;
  double soc_max = 1.0;
  int t_arrive = 1;
  int t_depart = 2;
  double p_max_kw = 0.0;
  double eta = 1.0;
  Vector price;  // $/kWh per slot, length T
  double alpha = 0.0;  // quadratic regularization weight

  // Throws std::invalid_argument on any violated invariant.
  void validate(int horizon, double dt_hours) const;
};

/// The private feasible charging region P_i: box constraints per slot
/// (zero outside the availability window) plus an interval constraint on
/// delivered energy sum(p_t)*dt. Energy bounds are pre-divided by eta so
/// they apply directly to the charged energy.
class FeasibleRegion {
 public:
  FeasibleRegion(const PevSpec& spec, int horizon, double dt_hours);

  int horizon() const { return static_cast<int>(p_max_.size()); }
  double dt_hours() const { return dt_; }
  double e_min() const { return e_min_; }
  double e_max() const { return e_max_; }
  const Vector& p_max() const { return p_max_; }
  bool in_window(int t) const { return p_max_[t] > 0.0; }

  bool contains(const Vector& p, double tol) const;

 private:
  Vector p_max_;   // per-slot upper bound, 0 outside window
  double e_min_ = 0.0;
  double e_max_ = 0.0;
  double dt_ = 1.0;
};

/// The coordinated charging problem: PEV roster, horizon, feeder-head
/// capacity vector L, and the designated processor i_star that knows L.
struct CocInstance {
  std::vector<PevSpec> pevs;
  int horizon = 0;
  double dt_hours = 1.0;
  Vector capacity;  // L, kW per slot
  int i_star = 0;   // id of the unique PEV informed of L

  void validate() const;
  const PevSpec& spec_of(int id) const;
  FeasibleRegion region_of(int id) const;
  int index_of(int id) const;  // position in pevs
};

/// Charging cost c'p*dt + (alpha/2)*||p||^2.
double cost(const PevSpec& spec, const Vector& p, double dt_hours);

/// Sufficient Slater certificate: the clipped window-midpoint profiles
/// must satisfy sum_i p_i < L strictly on every slot. A false result does
/// not prove the condition fails.
bool slater_check(const CocInstance& inst);

// Roster CSV: header row then one PEV per line with the scalar fields.
// Per-slot prices are kept in a separate prices file and attached on load.
std::vector<PevSpec> load_roster_csv(const std::string& path, const Vector& price);
void save_roster_csv(const std::string& path, const std::vector<PevSpec>& pevs);

}  // namespace pevcp
