#include "pevcp/processor.hpp"

#include <cmath>
#include <stdexcept>

namespace pevcp {

ProcessorState::ProcessorState(ProcessorConfig config, PevSpec spec, FeasibleRegion region,
                               Vector capacity_if_istar)
    : cfg_(config),
      spec_(std::move(spec)),
      region_(std::move(region)),
      capacity_(std::move(capacity_if_istar)),
      cuts_(config.dim()) {
  if (!(cfg_.m_init > 0.0))
    throw std::invalid_argument("processor: M_i must be > 0");
  if (cfg_.horizon < 1 || cfg_.n < 1 || cfg_.u_index < 0 || cfg_.u_index >= cfg_.n)
    throw std::invalid_argument("processor: inconsistent dimensions");
  if (region_.horizon() != cfg_.horizon)
    throw std::invalid_argument("processor: region horizon != config horizon");
  if (cfg_.is_istar && capacity_.size() != cfg_.horizon)
    throw std::invalid_argument("processor: i* needs the capacity vector");

  CutPlane bound;
  bound.a = e_vector(cfg_.horizon, cfg_.n);
  bound.b = cfg_.m_init;
  bound.kind = CutKind::kObjectiveBound;
  bound.origin_proc = cfg_.id;
  bound.origin_round = 0;
  cuts_.insert(std::move(bound));
  for (int t = 0; t < cfg_.horizon; ++t) {
    CutPlane nn;
    nn.a = Vector::Zero(cfg_.dim());
    nn.a[t] = -1.0;
    nn.b = 0.0;
    nn.kind = CutKind::kNonNegativity;
    nn.origin_proc = cfg_.id;
    nn.origin_round = 0;
    cuts_.insert(std::move(nn));
  }
  publish();
}

void ProcessorState::publish() {
  snapshot_ = std::make_shared<const CutSet>(cuts_);
  ++version_;
}

CutSet ProcessorState::read_phase(const std::vector<const CutSet*>& neighbor_sets) const {
  CutSet tmp = cuts_;
  for (const CutSet* s : neighbor_sets) {
    if (s == nullptr) continue;
    tmp = union_sets(tmp, *s);
  }
  return tmp;
}

OracleResult ProcessorState::run_oracle(const Vector& pi) const {
  return dual_oracle(spec_, region_, pi.cwiseMax(0.0), cfg_.is_istar, capacity_);
}

ProcessorState::CutGen ProcessorState::generate_cut(const QueryPoint& z) const {
  CutGen out;
  const OracleResult oracle = run_oracle(Vector(z.pi()));
  const double u_i = z.u()[cfg_.u_index];
  out.u_gap = u_i - oracle.value;
  if (out.u_gap <= 0.0) {
    out.cut = make_empty_cut(cfg_.dim());
    return out;
  }
  const double f_star = cost(spec_, oracle.argmin, region_.dt_hours());
  CutPlane cut;
  cut.a = Vector::Zero(cfg_.dim());
  if (cfg_.is_istar)
    cut.a.head(cfg_.horizon) = capacity_ - oracle.argmin;
  else
    cut.a.head(cfg_.horizon) = -oracle.argmin;
  cut.a[cfg_.horizon + cfg_.u_index] = 1.0;
  cut.b = f_star;
  cut.kind = CutKind::kOracleCut;
  cut.origin_proc = cfg_.id;
  cut.origin_round = local_clock();
  // Definition 1 (ii): the cut must separate the query point.
  if (cut.a.dot(z.z) <= cut.b)
    throw std::logic_error("generated cut does not separate its query point");
  out.cut = std::move(cut);
  return out;
}

std::shared_ptr<const CutSet> ProcessorState::iterate(
    const std::vector<const CutSet*>& inbound) {
  CutSet tmp = read_phase(inbound);
  const MasterResult master = master_solve(tmp, cfg_.rho, cfg_.horizon);
  CutSet pruned = prune_active(tmp, master.z, cfg_.eps_active);

  QueryPoint q{master.z, cfg_.horizon};
  CutGen gen = generate_cut(q);
  if (!gen.cut.empty()) pruned.insert(gen.cut);
  enforce_size_cap(pruned, cfg_.max_cuts, master.z);

  cuts_ = std::move(pruned);
  z_ = master.z;
  u_gap_ = gen.u_gap;
  j_history_.push_back(master.J);

  const long r = static_cast<long>(j_history_.size()) - 1;
  const int K = cfg_.criterion_window;
  cond1_ = r >= K &&
           j_history_[static_cast<std::size_t>(r - K)] - j_history_.back() < cfg_.epsilon;
  cond2_ = u_gap_ < cfg_.epsilon;
  stopped_ = cond1_ && cond2_;

  publish();
  return snapshot_;
}

bool ProcessorState::absorb(const std::vector<const CutSet*>& inbound) {
  CutSet merged = read_phase(inbound);
  const bool changed = merged.size() != cuts_.size();
  if (!changed) return false;
  const bool cut_off =
      z_.size() > 0 && !membership(merged, z_, 1e-9 * (1.0 + z_.norm()));
  cuts_ = std::move(merged);
  publish();
  return cut_off;
}

Vector ProcessorState::extract_profile() const {
  if (!stopped_) throw std::logic_error("extract_profile: processor has not stopped");
  return run_oracle(Vector(z_.head(cfg_.horizon))).argmin;
}

ProcessorState initialize(const ProcessorConfig& config, const PevSpec& spec,
                          const FeasibleRegion& region, const Vector& capacity_if_istar) {
  return ProcessorState(config, spec, region, capacity_if_istar);
}

}  // namespace pevcp
