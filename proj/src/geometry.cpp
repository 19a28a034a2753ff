#include "pevcp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace pevcp {

namespace {

constexpr double kDedupTol = 1e-12;
constexpr std::uint32_t kWireMagic = 0x43555453;  // "CUTS"
constexpr std::uint32_t kWireVersion = 1;

bool same_halfspace(const CutPlane& x, const CutPlane& y) {
  if (x.empty() || y.empty()) return x.empty() && y.empty();
  const double nx = x.a.norm();
  const double ny = y.a.norm();
  if (nx == 0.0 || ny == 0.0) return false;
  const double db = x.b / nx - y.b / ny;
  if (std::abs(db) > kDedupTol * (1.0 + std::abs(x.b / nx))) return false;
  return ((x.a / nx) - (y.a / ny)).lpNorm<Eigen::Infinity>() <= kDedupTol;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void require(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("cut-set wire data truncated");
  }
};

}  // namespace

CutPlane make_empty_cut(int dim) {
  CutPlane c;
  c.a = Vector::Zero(dim);
  c.b = 0.0;
  c.kind = CutKind::kEmpty;
  return c;
}

bool CutSet::insert(CutPlane cut) {
  if (cut.empty()) return false;
  if (cut.a.size() != dim_)
    throw std::invalid_argument("cut dimension mismatch");
  if (cut.a.norm() == 0.0)
    throw std::invalid_argument("non-empty cut must have a != 0");
  for (const auto& c : cuts_)
    if (same_halfspace(c, cut)) return false;
  cuts_.push_back(std::move(cut));
  return true;
}

void CutSet::remove_at(const std::vector<std::size_t>& sorted_indices) {
  for (auto it = sorted_indices.rbegin(); it != sorted_indices.rend(); ++it)
    cuts_.erase(cuts_.begin() + static_cast<std::ptrdiff_t>(*it));
}

CutSet union_sets(const CutSet& s1, const CutSet& s2) {
  if (s1.dim() != s2.dim())
    throw std::invalid_argument("union of cut sets with different dimensions");
  CutSet out(s1.dim());
  for (const auto& c : s1.cuts()) out.insert(c);
  for (const auto& c : s2.cuts()) out.insert(c);
  return out;
}

bool membership(const CutSet& s, const Vector& z, double tol) {
  if (z.size() != s.dim())
    throw std::invalid_argument("membership: dimension mismatch");
  for (const auto& c : s.cuts()) {
    if (c.empty()) continue;
    if (c.a.dot(z) > c.b + tol) return false;
  }
  return true;
}

CutSet prune_active(const CutSet& s, const Vector& z_opt, double eps_act) {
  CutSet out(s.dim());
  for (const auto& c : s.cuts()) {
    if (c.empty()) continue;
    if (c.protected_cut()) {
      out.insert(c);
      continue;
    }
    const double slack = std::abs(c.a.dot(z_opt) - c.b);
    if (slack <= eps_act * (1.0 + std::abs(c.b))) out.insert(c);
  }
  return out;
}

void enforce_size_cap(CutSet& s, std::size_t max_cuts, const Vector& z_ref) {
  if (max_cuts == 0 || s.size() <= max_cuts) return;
  std::vector<std::size_t> victims;
  const auto& cuts = s.cuts();
  for (std::size_t i = 0; i < cuts.size() && s.size() - victims.size() > max_cuts; ++i) {
    const auto& c = cuts[i];
    if (c.protected_cut()) continue;
    if (c.a.dot(z_ref) < c.b - 1e-12) victims.push_back(i);  // slack at z_ref
  }
  s.remove_at(victims);
}

std::vector<std::uint8_t> encode_cut_set(const CutSet& s) {
  std::vector<std::uint8_t> out;
  put_u32(out, kWireMagic);
  put_u32(out, kWireVersion);
  put_u32(out, static_cast<std::uint32_t>(s.dim()));
  put_u64(out, s.size());
  for (const auto& c : s.cuts()) {
    put_u32(out, static_cast<std::uint32_t>(c.a.size()));
    for (int i = 0; i < c.a.size(); ++i) put_f64(out, c.a[i]);
    put_f64(out, c.b);
    put_u32(out, static_cast<std::uint32_t>(c.origin_proc));
    put_u64(out, static_cast<std::uint64_t>(c.origin_round));
    out.push_back(static_cast<std::uint8_t>(c.kind));
  }
  return out;
}

CutSet decode_cut_set(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  if (r.u32() != kWireMagic) throw std::runtime_error("cut-set wire data: bad magic");
  if (r.u32() != kWireVersion) throw std::runtime_error("cut-set wire data: unsupported version");
  const int dim = static_cast<int>(r.u32());
  const std::uint64_t count = r.u64();
  CutSet out(dim);
  for (std::uint64_t k = 0; k < count; ++k) {
    CutPlane c;
    const std::uint32_t len = r.u32();
    c.a = Vector::Zero(len);
    for (std::uint32_t i = 0; i < len; ++i) c.a[i] = r.f64();
    c.b = r.f64();
    c.origin_proc = static_cast<int>(r.u32());
    c.origin_round = static_cast<long>(r.u64());
    r.require(1);
    c.kind = static_cast<CutKind>(r.buf[r.pos++]);
    if (!c.empty()) out.insert(std::move(c));
  }
  return out;
}

}  // namespace pevcp
