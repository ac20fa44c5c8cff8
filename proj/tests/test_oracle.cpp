#include <doctest.h>

#include <cmath>

#include <pwamc/oracle.hpp>

using namespace pwamc;

namespace {
// High-accuracy reference for the optimal cost from x0 = -1, generated by the
// closed-form antiderivative of the cell-2 HJB derivative (see oracle.cpp).
constexpr double kValueAtMinusOne = 4.157066478355044458;
}  // namespace

TEST_CASE("analytic feedback matches the closed form") {
  CHECK(oracle::analytic_feedback(1.0) == doctest::Approx(0.0));
  CHECK(oracle::analytic_feedback(0.0) ==
        doctest::Approx(std::sqrt(3.0) - 1.0).epsilon(1e-12));
  // k*(-1) = -(-1) - 1 + sqrt(2*4 + 0) = 2 sqrt(2).
  CHECK(oracle::analytic_feedback(-1.0) ==
        doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  // Branch continuity at x = 0.
  CHECK(std::abs(oracle::analytic_feedback(1e-13) -
                 oracle::analytic_feedback(-1e-13)) <= 1e-12);
}

TEST_CASE("analytic value function and its derivative") {
  CHECK(oracle::analytic_value(1.0) == doctest::Approx(0.0));
  CHECK(oracle::analytic_value(0.5) ==
        doctest::Approx((std::sqrt(3.0) - 1.0) * 0.25).epsilon(1e-14));
  CHECK(oracle::analytic_value(-1.0) ==
        doctest::Approx(kValueAtMinusOne).epsilon(1e-14));
  // Derivative continuity at the cell boundary.
  CHECK(std::abs(oracle::analytic_value_derivative(1e-13) -
                 oracle::analytic_value_derivative(-1e-13)) <= 1e-10);
  // Finite-difference agreement on both branches.
  for (double x : {-1.5, -0.5, 0.25, 1.5}) {
    const double h = 1e-6;
    const double fd =
        (oracle::analytic_value(x + h) - oracle::analytic_value(x - h)) / (2 * h);
    CHECK(oracle::analytic_value_derivative(x) ==
          doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("integration oracle agrees with the closed forms") {
  CHECK(oracle::oracle_cost(1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(oracle::oracle_cost(0.5) ==
        doctest::Approx(oracle::analytic_value(0.5)).epsilon(1e-8));
  CHECK(oracle::oracle_cost(-1.0) ==
        doctest::Approx(kValueAtMinusOne).epsilon(1e-7));
}

TEST_CASE("cost-to-go decreases toward the target from either side") {
  double prev = oracle::analytic_value(-2.0);
  for (double x = -1.75; x <= 1.0 + 1e-12; x += 0.25) {
    const double v = oracle::analytic_value(x);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
  prev = oracle::analytic_value(2.0);
  for (double x = 1.75; x >= 1.0 - 1e-12; x -= 0.25) {
    const double v = oracle::analytic_value(x);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("HJB stationarity of the analytic pair on cell 1") {
  // min_u [v'(x)(-x + 1 + u) + 2(x-1)^2 + u^2] = 0 for x >= 0; the interior
  // minimizer is u = -v'(x)/2 = k*(x).
  for (double x = 0.0; x <= 2.0 + 1e-12; x += 0.1) {
    const double vp = oracle::analytic_value_derivative(x);
    const double u = -vp / 2.0;
    CHECK(u == doctest::Approx(oracle::analytic_feedback(x)).epsilon(1e-10));
    const double H = vp * (-x + 1 + u) + 2 * (x - 1) * (x - 1) + u * u;
    CHECK(std::abs(H) <= 1e-9);
  }
}

TEST_CASE("self-comparison of the exact pipeline is tight") {
  PwaOcp ocp = builtin_example();
  Eigen::VectorXd xT(1);
  xT << 1.0;
  PolicyConfig cfg;
  cfg.diameter = 5e-4;
  cfg.epsilon = 1e-3;
  PolicyRun run = run_policy(ocp, oracle::analytic_value_gradient(), xT, cfg);
  REQUIRE(run.status == RunStatus::ReachedTarget);

  OrderResult fake;  // stand-in carrying only the fields compare() reads
  fake.d = 0;
  fake.value.lower_bound = oracle::analytic_value(-1.0);
  oracle::ComparisonReport rep = oracle::compare(fake, run, -1.0);
  CHECK(rep.cost_gap <= 1e-6);
  CHECK(rep.cost_gap >= -1e-4);  // suboptimality within integration slack
  CHECK(rep.feedback_sup_dev <= 1e-9);
  CHECK(rep.bound_gap <= 1e-6);  // oracle vs itself
  REQUIRE(!rep.points.empty());

  // Mismatched initial condition is rejected.
  CHECK_THROWS(oracle::compare(fake, run, 0.0));
}

TEST_CASE("feedback curve sampling") {
  auto rows = oracle::feedback_curve(-2.0, 2.0, 5);
  REQUIRE(rows.size() == 5);
  CHECK(rows.front()[0] == doctest::Approx(-2.0));
  CHECK(rows.back()[0] == doctest::Approx(2.0));
  for (const auto& r : rows)
    CHECK(r[1] == doctest::Approx(oracle::analytic_feedback(r[0])).epsilon(1e-14));
}
