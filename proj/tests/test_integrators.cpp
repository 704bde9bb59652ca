#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kamtori/errors.hpp"
#include "kamtori/integrators.hpp"
#include "kamtori/resonance.hpp"
#include "support.hpp"

using namespace kamtori;
using kt::kPi;

namespace {

const Scheme kIM = Scheme::of(SchemeKind::kImplicitMidpoint);
const Scheme kSV = Scheme::of(SchemeKind::kStoermerVerlet);
const Scheme kSE = Scheme::of(SchemeKind::kSymplecticEuler);
const Scheme kRK = Scheme::of(SchemeKind::kRungeExplicitMidpoint);

// Pendulum midpoint step by plain fixed-point iteration until it stalls.
PhaseState midpoint_reference(double p, double q, double h) {
  double P = p, Q = q;
  for (int it = 0; it < 10000; ++it) {
    const double pm = 0.5 * (p + P), qm = 0.5 * (q + Q);
    const double nP = p - h * std::sin(qm), nQ = q + h * pm;
    if (nP == P && nQ == Q) break;
    P = nP;
    Q = nQ;
  }
  return PhaseState({P}, {Q});
}

double bisect(double (*f)(double), double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

double max_abs_diff(const PhaseState& a, const PhaseState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dof(); ++i)
    m = std::max({m, std::abs(a.p[i] - b.p[i]), std::abs(a.q[i] - b.q[i])});
  return m;
}

}  // namespace

TEST_SUITE("integrators") {

TEST_CASE("scheme table") {
  CHECK(kIM.order == 2);
  CHECK(kSV.order == 2);
  CHECK(kSE.order == 1);
  CHECK(kRK.order == 2);
  CHECK(kIM.symplectic);
  CHECK(kSV.symplectic);
  CHECK(kSE.symplectic);
  CHECK_FALSE(kRK.symplectic);
  CHECK(scheme_names() == std::vector<std::string>{"im", "sv", "se", "runge"});
  for (const auto& n : scheme_names()) CHECK(scheme_from_name(n).cli_name() == n);
  try {
    scheme_from_name("imm");
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("imm") != std::string::npos);
    CHECK(msg.find("im, sv, se, runge") != std::string::npos);
  }
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK(c.tol == 1e-13);
  CHECK(c.max_iter == 50);
  CHECK(c.method == SolverMethod::kNewton);
  CHECK_NOTHROW(c.validate());
  c.tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c.tol = 1e-10;
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("free system is a fixed point of every scheme") {
  ExpressionSystem free_sys("free", 2, "1");
  const PhaseState s({0.3, -1.2}, {2.0, 0.5});
  for (const auto& name : scheme_names())
    for (double h : {0.01, 1.0, 10.0}) CHECK(step(scheme_from_name(name), free_sys, s, h) == s);
}

TEST_CASE("implicit midpoint step matches an independent fixed-point solve") {
  PendulumModel pend;
  const PhaseState got = step(kIM, pend, PhaseState({0.7}, {0.0}), 0.1);
  const PhaseState ref = midpoint_reference(0.7, 0.0, 0.1);
  CHECK(max_abs_diff(got, ref) <= 1e-12);
  kt::Gen g(3);
  for (int i = 0; i < 50; ++i) {
    const double p = g.uniform(-1, 1), q = g.uniform(-2, 2);
    CHECK(max_abs_diff(step(kIM, pend, PhaseState({p}, {q}), 0.1), midpoint_reference(p, q, 0.1)) <=
          1e-12);
  }
}

TEST_CASE("step argument errors") {
  PendulumModel pend;
  CHECK_THROWS_AS(step(kIM, pend, PhaseState({0.7}, {0.0}), 0.0), ArgumentError);
  CHECK_THROWS_AS(step(kIM, pend, PhaseState({0.7}, {0.0}), std::nan("")), ArgumentError);
  CHECK_THROWS_AS(step(kIM, pend, PhaseState({0.7, 0.1}, {0.0, 0.1}), 0.1), ArgumentError);
}

TEST_CASE("integrate") {
  PendulumModel pend;
  const PhaseState s0({0.7}, {0.0});
  const Trajectory t0 = integrate(kIM, pend, s0, 0.01, 0);
  REQUIRE(t0.states.size() == 1);
  CHECK(t0.states[0] == s0);

  const Trajectory t = integrate(kIM, pend, s0, 0.01, 100000);
  REQUIRE(t.states.size() == 100001);
  CHECK(std::memcmp(t.states[0].p.data(), s0.p.data(), sizeof(double)) == 0);
  CHECK(t.system == "pendulum");
  CHECK(t.h == 0.01);
  double worst = 0.0;
  for (const auto& s : t.states)
    worst = std::max(worst, std::abs(pend.hamiltonian(s.p, s.q) - 0.245) / 0.245);
  CHECK(worst <= 1e-4);
}

TEST_CASE("ruessmann first integrals stay bounded under IM") {
  RuessmannModel r;
  const PhaseState s0 = RuessmannModel::reference_initial_state();
  const Trajectory t = integrate(kIM, r, s0, 0.01, 100000);
  std::vector<double> I0(3), I(3);
  r.first_integrals(s0.p, s0.q, I0);
  double first[3] = {0, 0, 0}, second[3] = {0, 0, 0};
  for (std::size_t n = 0; n < t.states.size(); ++n) {
    r.first_integrals(t.states[n].p, t.states[n].q, I);
    for (int j = 0; j < 3; ++j) {
      const double e = std::abs(I[j] - I0[j]) / I0[j];
      (n <= 50000 ? first : second)[j] = std::max((n <= 50000 ? first : second)[j], e);
    }
  }
  for (int j = 0; j < 3; ++j) {
    // Quadratic invariants are conserved by the midpoint rule up to round-off.
    CHECK(first[j] <= 1e-10);
    CHECK(second[j] <= 1e-10);
  }
}

TEST_CASE("errors carry the failing step index") {
  PendulumModel pend;
  SolverConfig tight;
  tight.max_iter = 1;
  try {
    integrate(kIM, pend, PhaseState({0.7}, {0.0}), 0.5, 10, tight);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    REQUIRE(e.step_index().has_value());
    CHECK(*e.step_index() == 1);
    CHECK(e.last_residual() > tight.tol);
  }
  // sqrt(q) leaves its domain after the first explicit step.
  ExpressionSystem root("root", 1, "p^2/2 + sqrt(q)");
  try {
    integrate(kRK, root, PhaseState({0.0}, {0.1}), 1.0, 5);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("at step") != std::string::npos);
  }
}

TEST_CASE("solve_implicit") {
  // z - c: one Newton step.
  SolverConfig one;
  one.max_iter = 1;
  const auto z = solve_implicit(
      [](std::span<const double> x, std::span<double> r) {
        r[0] = x[0] - 3.0;
        r[1] = x[1] + 2.0;
      },
      {0.0, 0.0}, one);
  CHECK(z[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(-2.0).epsilon(1e-15));

  auto f = [](double x) { return x - 0.5 * std::sin(x) - 1.0; };
  const double oracle = bisect(+f, 0.0, 2.0);
  for (auto method : {SolverMethod::kNewton, SolverMethod::kFixedPoint}) {
    SolverConfig c;
    c.method = method;
    const auto root = solve_implicit(
        [&](std::span<const double> x, std::span<double> r) { r[0] = f(x[0]); }, {0.0}, c);
    CHECK(std::abs(root[0] - oracle) <= 1e-12);
  }

  CHECK_THROWS_AS(solve_implicit([](std::span<const double>, std::span<double>) {}, {}),
                  ArgumentError);
}

TEST_CASE("singular Jacobian falls back to damped fixed-point steps") {
  const auto z = solve_implicit(
      [](std::span<const double> x, std::span<double> r) {
        r[0] = x[0] + x[1] - 2.0;
        r[1] = x[0] + x[1] - 2.0;
      },
      {5.0, 1.0});
  CHECK(std::abs(z[0] + z[1] - 2.0) <= 1e-13);
}

TEST_CASE("midpoint equation at large step sizes") {
  auto residual_at = [](double h) {
    return [h](std::span<const double> z, std::span<double> r) {
      const double pm = 0.5 * (0.7 + z[0]), qm = 0.5 * z[1];
      r[0] = z[0] - 0.7 + h * std::sin(qm);
      r[1] = z[1] - h * pm;
    };
  };
  const auto z2 = solve_implicit(residual_at(2.0), {0.7, 0.0});
  std::vector<double> r(2);
  residual_at(2.0)(z2, r);
  CHECK(std::max(std::abs(r[0]), std::abs(r[1])) <= 1e-13);

  // Newton still finds a root at h = 50; the failure mode shows with
  // fixed-point iteration (contraction lost) or a capped iteration count.
  SolverConfig fp;
  fp.method = SolverMethod::kFixedPoint;
  CHECK_THROWS_AS(solve_implicit(residual_at(50.0), {0.7, 0.0}, fp), NonConvergenceError);
  SolverConfig capped;
  capped.max_iter = 2;
  try {
    solve_implicit(residual_at(50.0), {0.7, 0.0}, capped);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(std::isfinite(e.last_residual()));
    CHECK(e.last_residual() > capped.tol);
  }
}

TEST_CASE("jacobian determinant examples") {
  PendulumModel pend;
  RuessmannModel r;
  const PhaseState s({0.7}, {0.0});
  for (const auto& name : scheme_names()) {
    CHECK(std::abs(jacobian_determinant(scheme_from_name(name), pend, s, 1e-12) - 1.0) <= 1e-6);
    CHECK(std::abs(jacobian_determinant(scheme_from_name(name), r,
                                        RuessmannModel::reference_initial_state(), 1e-12) -
                   1.0) <= 1e-6);
  }
  CHECK(std::abs(jacobian_determinant(kIM, pend, s, 0.1) - 1.0) <= 1e-8);
  CHECK(std::abs(jacobian_determinant(kRK, pend, s, 0.5) - 1.0) > 1e-6);
}

TEST_CASE("symplecticity of the symplectic schemes") {
  PendulumModel pend;
  RuessmannModel r;
  kt::Gen g(5);
  for (const Scheme& sc : {kIM, kSV, kSE}) {
    for (double h : {0.01, 0.1, 0.5}) {
      for (int i = 0; i < 20; ++i) {
        const PhaseState s({g.uniform(-1, 1)}, {g.uniform(-kPi, kPi)});
        CHECK(std::abs(jacobian_determinant(sc, pend, s, h) - 1.0) <= 1e-7);
        const PhaseState c(g.vec(3, -0.6, 0.6), g.vec(3, -0.6, 0.6));
        CHECK(std::abs(jacobian_determinant(sc, r, c, h) - 1.0) <= 1e-7);
        CHECK(symplectic_defect(sc, r, c, h) <= 1e-6);
      }
    }
  }
  // The explicit midpoint rule is not symplectic on the three-degree system either.
  CHECK(symplectic_defect(kRK, r, RuessmannModel::reference_initial_state(), 0.5) > 1e-6);
}

TEST_CASE("order of accuracy") {
  PendulumModel pend;
  const PhaseState s0({0.7}, {0.3});
  const std::vector<double> hs{1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1};
  for (const Scheme& sc : {kIM, kSV, kSE, kRK}) {
    std::vector<double> errs;
    for (double h : hs) {
      const Trajectory ref = integrate(kIM, pend, s0, h / 1000, 1000);
      errs.push_back(max_abs_diff(step(sc, pend, s0, h), ref.states.back()));
    }
    const auto fit = fit_convergence_order(hs, errs);
    INFO("scheme " << sc.cli_name() << " slope " << fit.slope);
    CHECK(std::abs(fit.slope - (sc.order + 1)) <= 0.1);
  }
}

TEST_CASE("implicit midpoint is reversible") {
  PendulumModel pend;
  RuessmannModel r;
  kt::Gen g(6);
  SolverConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const PhaseState s({g.uniform(-1, 1)}, {g.uniform(-3, 3)});
    const double h = g.uniform(0.01, 0.5);
    CHECK(max_abs_diff(step(kIM, pend, step(kIM, pend, s, h), -h), s) <= 10 * cfg.tol);
    const PhaseState c(g.vec(3, -0.6, 0.6), g.vec(3, -0.6, 0.6));
    CHECK(max_abs_diff(step(kIM, r, step(kIM, r, c, h), -h), c) <= 10 * cfg.tol);
  }
}

TEST_CASE("Stoermer-Verlet is symplectic Euler composed with its adjoint") {
  PendulumModel pend;
  RuessmannModel r;
  kt::Gen g(7);
  for (int i = 0; i < 30; ++i) {
    const double h = g.uniform(0.01, 0.5);
    const PhaseState s({g.uniform(-1, 1)}, {g.uniform(-3, 3)});
    const PhaseState a = step(kSV, pend, s, h);
    const PhaseState b = step_adjoint_euler(pend, step(kSE, pend, s, h / 2), h / 2);
    CHECK(max_abs_diff(a, b) <= 1e-12);
    const PhaseState c(g.vec(3, -0.6, 0.6), g.vec(3, -0.6, 0.6));
    CHECK(max_abs_diff(step(kSV, r, c, h),
                       step_adjoint_euler(r, step(kSE, r, c, h / 2), h / 2)) <= 1e-12);
  }
}

TEST_CASE("trajectories are deterministic") {
  RuessmannModel r;
  const PhaseState s0 = RuessmannModel::reference_initial_state();
  for (const auto& name : scheme_names()) {
    const Trajectory a = integrate(scheme_from_name(name), r, s0, 0.05, 2000);
    const Trajectory b = integrate(scheme_from_name(name), r, s0, 0.05, 2000);
    REQUIRE(a.states.size() == b.states.size());
    bool same = true;
    for (std::size_t n = 0; n < a.states.size(); ++n)
      same = same && std::memcmp(a.states[n].p.data(), b.states[n].p.data(), 3 * sizeof(double)) == 0 &&
             std::memcmp(a.states[n].q.data(), b.states[n].q.data(), 3 * sizeof(double)) == 0;
    CHECK(same);
  }
}

}  // TEST_SUITE
