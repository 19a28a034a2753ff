#include <doctest.h>

#include "pevcp/geometry.hpp"
#include "pevcp/solvers.hpp"
#include "support/oracles.hpp"

using namespace pevcp;

namespace {

CutPlane cut_from(std::initializer_list<double> coeffs, double b,
                  CutKind kind = CutKind::kOracleCut) {
  CutPlane c;
  c.a = Vector::Zero(static_cast<int>(coeffs.size()));
  int i = 0;
  for (double v : coeffs) c.a[i++] = v;
  c.b = b;
  c.kind = kind;
  return c;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("union with the empty set is the identity") {
    CutSet s1(2), s2(2);
    s1.insert(cut_from({0.0, 1.0}, 5.0, CutKind::kObjectiveBound));
    const CutSet u = union_sets(s1, s2);
    CHECK(u.size() == 1);
  }

  TEST_CASE("union deduplicates identical and positively scaled cuts") {
    CutSet s1(2), s2(2);
    s1.insert(cut_from({0.0, 1.0}, 5.0));
    s2.insert(cut_from({0.0, 1.0}, 5.0));
    s2.insert(cut_from({0.0, 2.0}, 10.0));   // same half-space, scaled
    s2.insert(cut_from({0.0, -1.0}, -5.0));  // opposite side: kept
    const CutSet u = union_sets(s1, s2);
    CHECK(u.size() == 2);
  }

  TEST_CASE("union keeps both parallel cuts; membership uses the tighter") {
    CutSet s1(1), s2(1);
    s1.insert(cut_from({1.0}, 1.0));
    s2.insert(cut_from({1.0}, 2.0));
    const CutSet u = union_sets(s1, s2);
    CHECK(u.size() == 2);
    Vector z(1);
    z << 1.5;
    CHECK_FALSE(membership(u, z, 1e-12));
    z << 0.9;
    CHECK(membership(u, z, 1e-12));
  }

  TEST_CASE("union rejects dimension mismatch") {
    CutSet s1(2), s2(3);
    CHECK_THROWS_AS(union_sets(s1, s2), std::invalid_argument);
  }

  TEST_CASE("membership: empty set accepts everything, boundary included") {
    CutSet s(2);
    Vector z(2);
    z << 100.0, -100.0;
    CHECK(membership(s, z, 0.0));
    s.insert(cut_from({0.0, 1.0}, 1.0));
    z << 0.0, 1.0;
    CHECK(membership(s, z, 0.0));
    s.insert(cut_from({-1.0, 0.0}, 0.0));  // -pi_1 <= 0
    z << -0.1, 0.0;
    CHECK_FALSE(membership(s, z, 1e-12));
  }

  TEST_CASE("union of sets induces intersection of polyhedra") {
    testing::TestRng rng(3);
    const int dim = 4;
    auto random_set = [&](int cuts) {
      CutSet s(dim);
      for (int i = 0; i < cuts; ++i) {
        CutPlane c;
        c.a = Vector::Zero(dim);
        for (int d = 0; d < dim; ++d) c.a[d] = rng.uniform(-1.0, 1.0);
        c.b = rng.uniform(-0.5, 1.5);
        c.kind = CutKind::kOracleCut;
        if (c.a.norm() > 1e-9) s.insert(c);
      }
      return s;
    };
    const CutSet s1 = random_set(6);
    const CutSet s2 = random_set(5);
    const CutSet u = union_sets(s1, s2);
    for (int it = 0; it < 300; ++it) {
      Vector z(dim);
      for (int d = 0; d < dim; ++d) z[d] = rng.uniform(-2.0, 2.0);
      const bool in_both = membership(s1, z, 1e-12) && membership(s2, z, 1e-12);
      CHECK(membership(u, z, 1e-12) == in_both);
    }
  }

  TEST_CASE("prune keeps active cuts and the pruned master agrees") {
    // Master over {u1 <= 1, u1 <= 5}: only the first is active.
    CutSet s(1);
    s.insert(cut_from({1.0}, 1.0));
    s.insert(cut_from({1.0}, 5.0));
    const MasterResult m = master_solve(s, 0.25, 0);
    const CutSet pruned = prune_active(s, m.z, 1e-7);
    CHECK(pruned.size() == 1);
    const MasterResult m2 = master_solve(pruned, 0.25, 0);
    CHECK(m2.J == doctest::Approx(m.J).epsilon(1e-9));
  }

  TEST_CASE("prune on an interior optimum drops every oracle cut") {
    CutSet s(1);
    s.insert(cut_from({1.0}, 100.0));  // far away from the optimum u = 2
    const MasterResult m = master_solve(s, 0.25, 0);
    CHECK(m.z[0] == doctest::Approx(2.0));
    CHECK(prune_active(s, m.z, 1e-7).size() == 0);
  }

  TEST_CASE("prune never removes protected cuts") {
    CutSet s(2);
    s.insert(cut_from({0.0, 1.0}, 100.0, CutKind::kObjectiveBound));
    s.insert(cut_from({-1.0, 0.0}, 0.0, CutKind::kNonNegativity));
    s.insert(cut_from({0.0, 1.0}, 500.0));  // slack oracle cut
    Vector z(2);
    z << 1.0, 1.0;
    const CutSet pruned = prune_active(s, z, 1e-7);
    CHECK(pruned.size() == 2);
    for (const auto& c : pruned.cuts()) CHECK(c.protected_cut());
  }

  TEST_CASE("size cap evicts oldest slack oracle cuts first") {
    CutSet s(1);
    s.insert(cut_from({1.0}, 50.0, CutKind::kObjectiveBound));
    for (int i = 0; i < 6; ++i) s.insert(cut_from({1.0}, 10.0 + i));
    Vector z(1);
    z << 10.0;  // active on the first oracle cut only
    enforce_size_cap(s, 4, z);
    CHECK(s.size() == 4);
    CHECK(s.cuts()[0].kind == CutKind::kObjectiveBound);
    CHECK(s.cuts()[1].b == doctest::Approx(10.0));  // active cut survives
  }

  TEST_CASE("wire round trip preserves cuts") {
    testing::TestRng rng(17);
    CutSet s(3);
    s.insert(cut_from({0.0, 0.0, 1.0}, 42.0, CutKind::kObjectiveBound));
    for (int i = 0; i < 10; ++i) {
      CutPlane c;
      c.a = Vector::Zero(3);
      for (int d = 0; d < 3; ++d) c.a[d] = rng.uniform(-2.0, 2.0);
      c.b = rng.uniform(-1.0, 1.0);
      c.origin_proc = i % 4;
      c.origin_round = i;
      c.kind = CutKind::kOracleCut;
      s.insert(c);
    }
    const auto bytes = encode_cut_set(s);
    const CutSet back = decode_cut_set(bytes);
    REQUIRE(back.size() == s.size());
    REQUIRE(back.dim() == s.dim());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK((back.cuts()[i].a - s.cuts()[i].a).norm() == 0.0);
      CHECK(back.cuts()[i].b == s.cuts()[i].b);
      CHECK(back.cuts()[i].origin_proc == s.cuts()[i].origin_proc);
      CHECK(back.cuts()[i].origin_round == s.cuts()[i].origin_round);
      CHECK(back.cuts()[i].kind == s.cuts()[i].kind);
    }
  }

  TEST_CASE("wire decode rejects corrupted data") {
    CutSet s(2);
    s.insert(cut_from({1.0, 0.0}, 1.0));
    auto bytes = encode_cut_set(s);
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS(decode_cut_set(bytes));
    bytes[0] ^= 0xff;
    CHECK_THROWS(decode_cut_set(bytes));
  }

  TEST_CASE("monotone outer approximation under union") {
    testing::TestRng rng(23);
    const int dim = 3;
    CutSet acc(dim);
    for (int round = 0; round < 8; ++round) {
      CutSet incoming(dim);
      for (int i = 0; i < 3; ++i) {
        CutPlane c;
        c.a = Vector::Zero(dim);
        for (int d = 0; d < dim; ++d) c.a[d] = rng.uniform(-1.0, 1.0);
        c.b = rng.uniform(0.0, 2.0);
        if (c.a.norm() > 1e-9) incoming.insert(c);
      }
      const CutSet next = union_sets(acc, incoming);
      for (int it = 0; it < 50; ++it) {
        Vector z(dim);
        for (int d = 0; d < dim; ++d) z[d] = rng.uniform(-3.0, 3.0);
        if (membership(next, z, 1e-12)) {
          CHECK(membership(acc, z, 1e-12));
          CHECK(membership(incoming, z, 1e-12));
        }
      }
      acc = next;
    }
  }
}
