#include <doctest.h>

#include <cmath>
#include <random>

#include <pwamc/oracle.hpp>
#include <pwamc/policy.hpp>
#include <pwamc/problem.hpp>

using namespace pwamc;

TEST_CASE("polynomial_gradient matches the partial derivatives") {
  Polynomial v = Polynomial::parse("x1^3 - 2*x1 + 5", 1, 0);
  ValueGradient g = polynomial_gradient(v);
  Eigen::VectorXd x(1);
  x << 0.7;
  CHECK(g(x)[0] == doctest::Approx(3 * 0.49 - 2).epsilon(1e-14));
}

TEST_CASE("static_min is certified against a fine grid (m = 1)") {
  PwaOcp ocp = builtin_example();
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd grad(1), x(1);
    grad << u(rng);
    x << u(rng) / 2.0;
    const Cell& cell = ocp.cells[trial % 2];
    auto [ustar, qstar] = static_min(grad, cell, x, ocp.input_box);
    CHECK(ocp.input_box.contains(ustar, 1e-12));

    // Certify: exhaustive grid never beats the reported minimizer.
    auto q = [&](double uu) {
      Eigen::VectorXd uv(1);
      uv << uu;
      Eigen::VectorXd xu(2);
      xu << x[0], uu;
      return grad.dot(cell.dynamics(x, uv)) + cell.lagrangian.evaluate(xu);
    };
    CHECK(q(ustar[0]) == doctest::Approx(qstar).epsilon(1e-12));
    for (int k = 0; k <= 2000; ++k) {
      const double uu = ocp.input_box.lo[0] +
                        k * (ocp.input_box.hi[0] - ocp.input_box.lo[0]) / 2000.0;
      CHECK(qstar <= q(uu) + 1e-9);
    }
  }
}

TEST_CASE("static_min tie-breaking prefers the lexicographically smaller input") {
  // q(u) = (u^2 - 1)^2 has two global minimizers of equal norm at u = +/-1.
  PwaOcp ocp = builtin_example();
  Cell cell = ocp.cells[0];
  cell.A.setZero();
  cell.a.setZero();
  cell.B.setZero();
  cell.lagrangian = Polynomial::parse("(u1^2 - 1)^2", 1, 1);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  auto [ustar, qstar] = static_min(grad, cell, x, ocp.input_box);
  CHECK(ustar[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(qstar == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("integrator tracks the affine closed form to 1e-8") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd x0(1), u(1);
  x0 << 0.5;
  u << 0.0;
  PolicyConfig cfg;
  // Cell 1, u = 0: x(t) = 1 + (x0 - 1) e^{-t}, never leaves {x >= 0}.
  HoldResult h = integrate_hold(ocp, 0, x0, u, 0.0, 2.0, cfg);
  CHECK(h.exit == HoldExit::BudgetExhausted);
  CHECK(h.t_end == doctest::Approx(2.0).epsilon(1e-14));
  double max_err = 0.0;
  for (const auto& s : h.samples)
    max_err = std::max(max_err,
                       std::abs(s.x[0] - (1.0 - 0.5 * std::exp(-s.t))));
  CHECK(max_err <= 1e-8);
}

TEST_CASE("boundary crossings are located to 1e-9") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd x0(1), u(1);
  x0 << 0.5;
  u << -1.6;
  // Cell 1: xdot = -x - 0.6, x(t) = -0.6 + 1.1 e^{-t}; the guard x >= 0
  // crosses zero at t* = ln(1.1 / 0.6).
  PolicyConfig cfg;
  HoldResult h = integrate_hold(ocp, 0, x0, u, 0.0, 5.0, cfg);
  CHECK(h.exit == HoldExit::BoundaryHit);
  CHECK(std::abs(h.t_end - std::log(1.1 / 0.6)) <= 1e-9);
  CHECK(std::abs(h.x_end[0]) <= 1e-9);
}

TEST_CASE("zero-step run when the start is already within epsilon") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd xT(1);
  xT << 1.0;
  PolicyConfig cfg;
  cfg.epsilon = 3.0;  // larger than ||x0 - xT||
  PolicyRun run = run_policy(ocp, oracle::analytic_value_gradient(), xT, cfg);
  CHECK(run.status == RunStatus::ReachedTarget);
  CHECK(run.points.empty());
  CHECK(run.cost == doctest::Approx(0.0));  // L_T = 0
  CHECK(run.total_time == doctest::Approx(0.0));
}

TEST_CASE("tiny diameter with a small step budget exits MaxSteps") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd xT(1);
  xT << 1.0;
  PolicyConfig cfg;
  cfg.diameter = 1e-9;
  cfg.max_steps = 10;
  PolicyRun run = run_policy(ocp, oracle::analytic_value_gradient(), xT, cfg);
  CHECK(run.status == RunStatus::MaxSteps);
}

TEST_CASE("exact value function reproduces the analytic feedback") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd xT(1);
  xT << 1.0;
  PolicyConfig cfg;
  cfg.diameter = 0.01;
  cfg.epsilon = 0.01;
  PolicyRun run = run_policy(ocp, oracle::analytic_value_gradient(), xT, cfg);
  REQUIRE(run.status == RunStatus::ReachedTarget);
  for (const auto& p : run.points)
    CHECK(std::abs(p.u[0] - oracle::analytic_feedback(p.x[0])) <= 1e-6);
  // The recomputed cost matches the online accumulation.
  CHECK(accumulated_cost(run, ocp) == doctest::Approx(run.cost).epsilon(1e-12));
}
