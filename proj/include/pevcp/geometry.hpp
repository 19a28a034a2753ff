#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "pevcp/model.hpp"

namespace pevcp {

enum class CutKind : std::uint8_t {
  kObjectiveBound = 0,  // e'z <= M, never pruned
  kNonNegativity = 1,   // -pi_t <= 0, never pruned
  kOracleCut = 2,
  kEmpty = 3,
};

/// A half-space a'z <= b in the surrogate variable z = (pi, u), tagged
/// with provenance. The empty cut (a = 0, b = 0) is ignored by the
/// induced polyhedron.
struct CutPlane {
  Vector a;
  double b = 0.0;
  int origin_proc = -1;
  long origin_round = -1;
  CutKind kind = CutKind::kOracleCut;

  bool empty() const { return kind == CutKind::kEmpty; }
  bool protected_cut() const {
    return kind == CutKind::kObjectiveBound || kind == CutKind::kNonNegativity;
  }
};

CutPlane make_empty_cut(int dim);

/// A deduplicated collection of cutting-planes over a fixed z-dimension.
/// The induced polyhedron is the intersection of the member half-spaces;
/// set union therefore intersects polyhedra. Cuts keep insertion order,
/// which size-cap eviction uses as age.
class CutSet {
 public:
  CutSet() = default;
  explicit CutSet(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  const std::vector<CutPlane>& cuts() const { return cuts_; }
  std::size_t size() const { return cuts_.size(); }

  // Appends if no equivalent cut (up to positive scaling, tol 1e-12) is
  // present. Empty cuts are dropped. Returns true when inserted.
  bool insert(CutPlane cut);

  void remove_at(const std::vector<std::size_t>& sorted_indices);

 private:
  int dim_ = 0;
  std::vector<CutPlane> cuts_;
};

/// Deduplicated union; the result's polyhedron is the intersection of the
/// operands'. Throws on dimension mismatch.
CutSet union_sets(const CutSet& s1, const CutSet& s2);

/// True iff a'z <= b + tol for every non-empty cut.
bool membership(const CutSet& s, const Vector& z, double tol);

/// Keeps cuts active at z_opt within a relative tolerance, plus all
/// protected cuts (objective bound and nonnegativity).
CutSet prune_active(const CutSet& s, const Vector& z_opt, double eps_act);

/// Evicts oldest slack oracle cuts until size <= max_cuts (0 = unlimited).
void enforce_size_cap(CutSet& s, std::size_t max_cuts, const Vector& z_ref);

// Wire form: versioned little-endian header, then length-prefixed records.
std::vector<std::uint8_t> encode_cut_set(const CutSet& s);
CutSet decode_cut_set(const std::vector<std::uint8_t>& bytes);

}  // namespace pevcp
