#include <doctest.h>

#include "pevcp/baselines.hpp"
#include "pevcp/solvers.hpp"
#include "support/oracles.hpp"

using namespace pevcp;

namespace {

// Window {1,2}, p_max = 1, energy in [1,2], prices (1,2).
PevSpec toy_spec(double alpha = 0.0) {
  PevSpec s;
  s.id = 0;
  s.cap_kwh = 2.0;
  s.soc_start = 0.0;
  s.soc_target = 0.5;
  s.soc_max = 1.0;
  s.t_arrive = 1;
  s.t_depart = 2;
  s.p_max_kw = 1.0;
  s.eta = 1.0;
  s.price = Vector(2);
  s.price << 1.0, 2.0;
  s.alpha = alpha;
  return s;
}

PevSpec random_spec(testing::TestRng& rng, int T, bool allow_linear) {
  PevSpec s;
  s.id = 0;
  s.t_arrive = rng.uniform_int(1, std::max(1, T - 1));
  s.t_depart = rng.uniform_int(s.t_arrive + 1, T);
  s.cap_kwh = rng.uniform(0.5, 2.0);
  s.soc_start = rng.uniform(0.0, 0.4);
  s.soc_target = s.soc_start + rng.uniform(0.0, 0.5);
  s.soc_max = std::min(1.0, s.soc_target + rng.uniform(0.0, 0.3));
  s.eta = rng.uniform(0.8, 1.0);
  const double demand = (s.soc_target - s.soc_start) * s.cap_kwh;
  const double len = s.t_depart - s.t_arrive;
  s.p_max_kw = std::max(demand / (s.eta * len) * rng.uniform(1.05, 2.0), 0.4);
  s.p_max_kw = std::min(s.p_max_kw, 1.2);
  s.alpha = allow_linear && rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.05, 1.0);
  s.price = Vector(T);
  for (int t = 0; t < T; ++t) s.price[t] = rng.uniform(0.1, 1.0);
  return s;
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("oracle on the toy region: cheapest slot takes the demand") {
    const PevSpec s = toy_spec();
    FeasibleRegion region(s, 2, 1.0);
    const auto r = dual_oracle(s, region, Vector::Zero(2), false, Vector());
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.argmin[0] == doctest::Approx(1.0));
    CHECK(r.argmin[1] == doctest::Approx(0.0));
    // Grid cross-check.
    const auto g = testing::grid_search_separable(region, s.price, 0.0);
    CHECK(r.value == doctest::Approx(g.value).epsilon(1e-6));
  }

  TEST_CASE("oracle with pinned zero energy returns the zero profile") {
    PevSpec s = toy_spec();
    s.soc_target = 0.0;
    s.soc_max = 0.0;
    FeasibleRegion region(s, 2, 1.0);
    const auto r = dual_oracle(s, region, Vector::Zero(2), false, Vector());
    CHECK(r.value == doctest::Approx(0.0));
    CHECK(r.argmin.norm() == doctest::Approx(0.0));
  }

  TEST_CASE("designated processor gets the -pi'L shift") {
    const PevSpec s = toy_spec();
    FeasibleRegion region(s, 2, 1.0);
    Vector pi(2), L(2);
    pi << 1.0, 1.0;
    L << 1.0, 1.0;
    const auto plain = dual_oracle(s, region, pi, false, Vector());
    const auto star = dual_oracle(s, region, pi, true, L);
    CHECK(star.shift_applied);
    CHECK(star.value == doctest::Approx(plain.value - 2.0).epsilon(1e-9));
    // Grid-search the shifted objective.
    Vector g_coeffs = s.price + pi;  // dt = 1
    const auto g = testing::grid_search_separable(region, g_coeffs, 0.0);
    CHECK(star.value == doctest::Approx(g.value - 2.0).epsilon(1e-6));
  }

  TEST_CASE("oracle rejects negative prices on the dual side") {
    const PevSpec s = toy_spec();
    FeasibleRegion region(s, 2, 1.0);
    Vector pi(2);
    pi << -0.1, 0.0;
    CHECK_THROWS_AS(dual_oracle(s, region, pi, false, Vector()), std::invalid_argument);
  }

  TEST_CASE("oracle matches grid search on random instances") {
    testing::TestRng rng(101);
    for (int it = 0; it < 60; ++it) {
      const int T = rng.uniform_int(2, 3);
      PevSpec s = random_spec(rng, T, true);
      FeasibleRegion region(s, T, 1.0);
      Vector pi(T);
      for (int t = 0; t < T; ++t) pi[t] = rng.uniform01() < 0.2 ? 0.0 : rng.uniform(0.0, 1.0);
      const auto r = dual_oracle(s, region, pi, false, Vector());
      CHECK(region.contains(r.argmin, 1e-8));
      CHECK(r.value ==
            doctest::Approx(cost(s, r.argmin, 1.0) + pi.dot(r.argmin)).epsilon(1e-9));
      const auto g =
          testing::grid_search_separable(region, Vector(s.price + pi), s.alpha, 2e-3);
      CHECK(std::abs(r.value - g.value) <= 1e-4);
    }
  }

  TEST_CASE("minus U is convex along random segments") {
    testing::TestRng rng(7);
    for (int inst = 0; inst < 10; ++inst) {
      const int T = rng.uniform_int(2, 3);
      const PevSpec s = random_spec(rng, T, true);
      FeasibleRegion region(s, T, 1.0);
      for (int it = 0; it < 20; ++it) {
        Vector p1(T), p2(T);
        for (int t = 0; t < T; ++t) {
          p1[t] = rng.uniform(0.0, 2.0);
          p2[t] = rng.uniform(0.0, 2.0);
        }
        const double lam = rng.uniform01();
        const double u1 = dual_oracle(s, region, p1, false, Vector()).value;
        const double u2 = dual_oracle(s, region, p2, false, Vector()).value;
        const double umid =
            dual_oracle(s, region, Vector(lam * p1 + (1 - lam) * p2), false, Vector()).value;
        CHECK(umid >= lam * u1 + (1 - lam) * u2 - 1e-9);
      }
    }
  }

  TEST_CASE("master on one halfspace is an analytic projection") {
    // dim 2, all-u coordinates, cuts {u1 + u2 <= 2}, rho = 1/4:
    // project (2,2) onto the halfspace -> (1,1), J = 2 - 0.25*2.
    CutSet s(2);
    CutPlane c;
    c.a = Vector::Constant(2, 1.0);
    c.b = 2.0;
    s.insert(c);
    const auto m = master_solve(s, 0.25, 0);
    CHECK(m.z[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.z[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.J == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(m.active.size() == 1);
  }

  TEST_CASE("master with slack bound returns the unconstrained maximizer") {
    // pi >= 0 cuts plus e'z <= M with M large: z = e/(2 rho).
    const int T = 1, n = 2;
    const double rho = 0.25;
    CutSet s(T + n);
    CutPlane bound;
    bound.a = e_vector(T, n);
    bound.b = 100.0;
    bound.kind = CutKind::kObjectiveBound;
    s.insert(bound);
    CutPlane nn;
    nn.a = Vector::Zero(T + n);
    nn.a[0] = -1.0;
    nn.kind = CutKind::kNonNegativity;
    s.insert(nn);
    const auto m = master_solve(s, rho, T);
    CHECK(m.z[0] == doctest::Approx(0.0));
    CHECK(m.z[1] == doctest::Approx(2.0));
    CHECK(m.z[2] == doctest::Approx(2.0));
    CHECK(m.J == doctest::Approx(n / (4.0 * rho)).epsilon(1e-10));
  }

  TEST_CASE("master respects equality-pinned coordinates") {
    CutSet s(1);
    CutPlane up, down;
    up.a = Vector::Constant(1, 1.0);
    up.b = 0.7;
    down.a = Vector::Constant(1, -1.0);
    down.b = -0.7;
    s.insert(up);
    s.insert(down);
    for (double rho : {0.1, 1.0, 10.0}) {
      const auto m = master_solve(s, rho, 0);
      CHECK(m.z[0] == doctest::Approx(0.7).epsilon(1e-9));
    }
  }

  TEST_CASE("master detects an empty polyhedron") {
    CutSet s(1);
    CutPlane up, down;
    up.a = Vector::Constant(1, 1.0);
    up.b = -1.0;  // u <= -1
    down.a = Vector::Constant(1, -1.0);
    down.b = -2.0;  // u >= 2
    s.insert(up);
    s.insert(down);
    CHECK_THROWS_AS(master_solve(s, 0.5, 0), MasterInfeasibleError);
  }

  TEST_CASE("projection matches exhaustive enumeration on random polyhedra") {
    testing::TestRng rng(2024);
    for (int it = 0; it < 40; ++it) {
      const int dim = rng.uniform_int(2, 6);
      const int m = rng.uniform_int(1, 12);
      Vector interior(dim), y(dim);
      for (int d = 0; d < dim; ++d) {
        interior[d] = rng.uniform(-1.0, 1.0);
        y[d] = rng.uniform(-3.0, 3.0);
      }
      Matrix A(m, dim);
      Vector b(m);
      for (int i = 0; i < m; ++i) {
        for (int d = 0; d < dim; ++d) A(i, d) = rng.uniform(-1.0, 1.0);
        if (A.row(i).norm() < 1e-6) A(i, 0) = 1.0;
        b[i] = A.row(i).dot(interior) + rng.uniform(0.0, 1.5);
      }
      const auto mine = project_onto_polyhedron(A, b, y);
      const Vector ref = testing::enumerate_projection(A, b, y);
      CHECK((mine.z - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
  }

  TEST_CASE("weak duality: any valid outer approximation stays above J*") {
    const auto inst = testing::make_contended_instance(3, 3, 99);
    const double rho = 1e-3;
    const auto central = centralized_solve(inst, 1e-8, rho);
    // Build an arbitrary valid outer approximation of S by querying the
    // oracles at a few price vectors.
    const int T = inst.horizon, n = static_cast<int>(inst.pevs.size());
    CutSet s(T + n);
    CutPlane bound;
    bound.a = e_vector(T, n);
    bound.b = 1000.0;
    bound.kind = CutKind::kObjectiveBound;
    s.insert(bound);
    for (int t = 0; t < T; ++t) {
      CutPlane nn;
      nn.a = Vector::Zero(T + n);
      nn.a[t] = -1.0;
      nn.kind = CutKind::kNonNegativity;
      s.insert(nn);
    }
    testing::TestRng rng(5);
    for (int probe = 0; probe < 5; ++probe) {
      Vector pi(T);
      for (int t = 0; t < T; ++t) pi[t] = rng.uniform(0.0, 1.0);
      for (int i = 0; i < n; ++i) {
        FeasibleRegion region(inst.pevs[i], T, inst.dt_hours);
        const auto o =
            dual_oracle(inst.pevs[i], region, pi, inst.pevs[i].id == inst.i_star,
                        inst.capacity);
        CutPlane c;
        c.a = Vector::Zero(T + n);
        if (inst.pevs[i].id == inst.i_star)
          c.a.head(T) = inst.capacity - o.argmin;
        else
          c.a.head(T) = -o.argmin;
        c.a[T + i] = 1.0;
        c.b = cost(inst.pevs[i], o.argmin, inst.dt_hours);
        s.insert(c);
      }
      const auto m = master_solve(s, rho, T);
      CHECK(m.J >= central.j_star - 1e-9);
    }
  }

  TEST_CASE("primal recovery: inactive coupling reproduces selfish profiles") {
    auto inst = testing::make_contended_instance(3, 3, 55);
    inst.capacity = Vector::Constant(inst.horizon, 1e6);  // decouple
    const auto rec = primal_recovery(Vector::Zero(inst.horizon), inst);
    const auto selfish = mode2_selfish(inst);
    for (std::size_t i = 0; i < rec.profiles.size(); ++i)
      CHECK((rec.profiles[i] - selfish.profiles[i]).lpNorm<Eigen::Infinity>() <= 1e-10);
  }

  TEST_CASE("centralized on the decoupled toy: each PEV takes its cheap slot") {
    CocInstance inst;
    inst.horizon = 2;
    inst.dt_hours = 1.0;
    PevSpec a = toy_spec(1e-6);
    PevSpec b = toy_spec(1e-6);
    b.id = 1;
    b.price << 2.0, 1.0;  // prefers slot 2
    inst.pevs = {a, b};
    inst.capacity = Vector::Constant(2, 2.0);
    inst.i_star = 0;
    const auto c = centralized_solve(inst, 1e-9);
    CHECK(c.primal_cost == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(c.aggregate_violation <= 1e-8);
  }

  TEST_CASE("centralized on the contended toy: total cost three") {
    // Both prefer slot 1, each needs 1 unit, L = (1,1): any split keeps
    // aggregate (1,1); cost = 1*1 + 2*1 = 3 at alpha -> 0.
    CocInstance inst;
    inst.horizon = 2;
    inst.dt_hours = 1.0;
    PevSpec a = toy_spec(1e-6);
    a.soc_max = 0.5;  // pin energy to exactly 1
    PevSpec b = a;
    b.id = 1;
    inst.pevs = {a, b};
    inst.capacity = Vector::Constant(2, 1.0 + 1e-4);  // strict interior margin
    inst.i_star = 0;
    const auto c = centralized_solve(inst, 1e-8);
    // Any split p_A = (x, 1-x), p_B = (1-x, x) keeps the aggregate at
    // (1,1), so the cost is 1 + 2 = 3 independent of x.
    CHECK(c.primal_cost == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(c.aggregate_violation <= 1e-6);
  }

  TEST_CASE("centralized with binding capacity equal to the selfish profile") {
    CocInstance inst;
    inst.horizon = 2;
    inst.dt_hours = 1.0;
    inst.pevs = {toy_spec(1e-6)};
    inst.i_star = 0;
    const auto selfish = mode2_selfish([&] {
      CocInstance tmp = inst;
      tmp.capacity = Vector::Constant(2, 10.0);
      return tmp;
    }());
    inst.capacity = selfish.profiles[0] + Vector::Constant(2, 1e-3);
    inst.capacity = inst.capacity.cwiseMax(0.8);  // strict interior for the certificate
    const auto c = centralized_solve(inst, 1e-8);
    CHECK(c.primal_cost == doctest::Approx(selfish.total_cost).epsilon(1e-4));
  }

  TEST_CASE("centralized agrees with grid search on tiny instances") {
    testing::TestRng rng(31);
    for (int it = 0; it < 5; ++it) {
      const auto inst = testing::make_contended_instance(2, 2, 300 + it);
      const auto c = centralized_solve(inst, 1e-9);
      // Brute force the two profiles jointly on a grid.
      FeasibleRegion r0(inst.pevs[0], 2, 1.0), r1(inst.pevs[1], 2, 1.0);
      double best = 1e18;
      const double h = 5e-3;
      for (double a0 = 0.0; a0 <= inst.pevs[0].p_max_kw + 1e-12; a0 += h)
        for (double a1 = 0.0; a1 <= inst.pevs[0].p_max_kw + 1e-12; a1 += h) {
          Vector pa(2);
          pa << a0, a1;
          if (!r0.contains(pa, 1e-9)) continue;
          for (double b0 = 0.0; b0 <= inst.pevs[1].p_max_kw + 1e-12; b0 += h)
            for (double b1 = 0.0; b1 <= inst.pevs[1].p_max_kw + 1e-12; b1 += h) {
              Vector pb(2);
              pb << b0, b1;
              if (!r1.contains(pb, 1e-9)) continue;
              if (a0 + b0 > inst.capacity[0] + 1e-9) continue;
              if (a1 + b1 > inst.capacity[1] + 1e-9) continue;
              best = std::min(best, cost(inst.pevs[0], pa, 1.0) + cost(inst.pevs[1], pb, 1.0));
            }
        }
      CHECK(c.primal_cost == doctest::Approx(best).epsilon(2e-2));
      CHECK(c.primal_cost <= best + 1e-6);  // grid cost is an upper bound
    }
  }

  TEST_CASE("centralized rejects a Slater-infeasible instance") {
    CocInstance inst;
    inst.horizon = 2;
    inst.dt_hours = 1.0;
    PevSpec s = toy_spec(1e-3);
    s.soc_max = 0.5;  // pinned energy 1
    inst.pevs = {s};
    inst.capacity = Vector::Constant(2, 0.4);  // cannot deliver 1 kWh
    inst.i_star = 0;
    CHECK_THROWS(centralized_solve(inst, 1e-6));
  }
}
