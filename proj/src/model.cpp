#include "pevcp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pevcp {

namespace {

void fail(const std::string& what) { throw std::invalid_argument(what); }

}  // namespace

void PevSpec::validate(int horizon, double dt_hours) const {
  if (!(cap_kwh > 0.0)) fail("pev " + std::to_string(id) + ": cap_kwh must be > 0");
  if (!(0.0 <= soc_start && soc_start <= soc_target && soc_target <= soc_max && soc_max <= 1.0))
    fail("pev " + std::to_string(id) + ": need 0 <= soc_start <= soc_target <= soc_max <= 1");
  if (!(1 <= t_arrive && t_arrive < t_depart && t_depart <= horizon))
    fail("pev " + std::to_string(id) + ": need 1 <= t_arrive < t_depart <= T");
  if (!(p_max_kw > 0.0)) fail("pev " + std::to_string(id) + ": p_max_kw must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) fail("pev " + std::to_string(id) + ": eta must be in (0,1]");
  if (price.size() != horizon)
    fail("pev " + std::to_string(id) + ": price length != horizon");
  if (alpha < 0.0) fail("pev " + std::to_string(id) + ": alpha must be >= 0");
  const double window_hours = (t_depart - t_arrive) * dt_hours;
  const double demand = (soc_target - soc_start) * cap_kwh;
  if (eta * p_max_kw * window_hours < demand - 1e-12)
    fail("pev " + std::to_string(id) + ": demand infeasible within availability window");
}

FeasibleRegion::FeasibleRegion(const PevSpec& spec, int horizon, double dt_hours) {
  spec.validate(horizon, dt_hours);
  dt_ = dt_hours;
  p_max_ = Vector::Zero(horizon);
  for (int t = spec.t_arrive; t <= spec.t_depart; ++t) p_max_[t - 1] = spec.p_max_kw;
  e_min_ = (spec.soc_target - spec.soc_start) * spec.cap_kwh / spec.eta;
  e_max_ = (spec.soc_max - spec.soc_start) * spec.cap_kwh / spec.eta;
  const double chargeable = p_max_.sum() * dt_;
  if (e_min_ > chargeable + 1e-12)
    fail("pev " + std::to_string(spec.id) + ": empty feasible region");
}

bool FeasibleRegion::contains(const Vector& p, double tol) const {
  if (p.size() != p_max_.size()) return false;
  for (int t = 0; t < p.size(); ++t) {
    if (p[t] < -tol || p[t] > p_max_[t] + tol) return false;
  }
  const double energy = p.sum() * dt_;
  return energy >= e_min_ - tol && energy <= e_max_ + tol;
}

void CocInstance::validate() const {
  if (horizon < 1) fail("horizon must be >= 1");
  if (!(dt_hours > 0.0)) fail("dt_hours must be > 0");
  if (capacity.size() != horizon) fail("capacity length != horizon");
  if (capacity.minCoeff() < 0.0) fail("capacity must be componentwise nonnegative");
  int star_hits = 0;
  for (const auto& s : pevs) {
    s.validate(horizon, dt_hours);
    if (s.id == i_star) ++star_hits;
  }
  if (!pevs.empty() && star_hits != 1) fail("i_star must match exactly one PEV id");
}

const PevSpec& CocInstance::spec_of(int id) const {
  for (const auto& s : pevs)
    if (s.id == id) return s;
  throw std::invalid_argument("unknown PEV id " + std::to_string(id));
}

FeasibleRegion CocInstance::region_of(int id) const {
  return FeasibleRegion(spec_of(id), horizon, dt_hours);
}

int CocInstance::index_of(int id) const {
  for (size_t i = 0; i < pevs.size(); ++i)
    if (pevs[i].id == id) return static_cast<int>(i);
  throw std::invalid_argument("unknown PEV id " + std::to_string(id));
}

double cost(const PevSpec& spec, const Vector& p, double dt_hours) {
  if (p.size() != spec.price.size())
    throw std::invalid_argument("cost: profile length != price length");
  return spec.price.dot(p) * dt_hours + 0.5 * spec.alpha * p.squaredNorm();
}

bool slater_check(const CocInstance& inst) {
  if (inst.pevs.empty()) return true;
  Vector total = Vector::Zero(inst.horizon);
  for (const auto& spec : inst.pevs) {
    FeasibleRegion region(spec, inst.horizon, inst.dt_hours);
    const int slots = spec.t_depart - spec.t_arrive + 1;
    const double mid = (region.e_min() + region.e_max()) / (2.0 * slots * inst.dt_hours);
    const double level = std::clamp(mid, 0.0, spec.p_max_kw);
    for (int t = spec.t_arrive; t <= spec.t_depart; ++t) total[t - 1] += level;
  }
  return (total.array() < inst.capacity.array()).all();
}

std::vector<PevSpec> load_roster_csv(const std::string& path, const Vector& price) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open roster file: " + path);
  std::vector<PevSpec> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first) {  // header
      first = false;
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> fields;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (fields.size() != 10)
      throw std::runtime_error("roster row needs 10 fields: " + line);
    PevSpec s;
    s.id = std::stoi(fields[0]);
    s.cap_kwh = std::stod(fields[1]);
    s.soc_start = std::stod(fields[2]);
    s.soc_target = std::stod(fields[3]);
    s.soc_max = std::stod(fields[4]);
    s.t_arrive = std::stoi(fields[5]);
    s.t_depart = std::stoi(fields[6]);
    s.p_max_kw = std::stod(fields[7]);
    s.eta = std::stod(fields[8]);
    s.alpha = std::stod(fields[9]);
    s.price = price;
    out.push_back(std::move(s));
  }
  return out;
}

void save_roster_csv(const std::string& path, const std::vector<PevSpec>& pevs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write roster file: " + path);
  out << "id,cap_kwh,soc_start,soc_target,soc_max,t_arrive,t_depart,p_max_kw,eta,alpha\n";
  out.precision(17);
  for (const auto& s : pevs) {
    out << s.id << ',' << s.cap_kwh << ',' << s.soc_start << ',' << s.soc_target << ','
        << s.soc_max << ',' << s.t_arrive << ',' << s.t_depart << ',' << s.p_max_kw << ','
        << s.eta << ',' << s.alpha << '\n';
  }
}

}  // namespace pevcp
