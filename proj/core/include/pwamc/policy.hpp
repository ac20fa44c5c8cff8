#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "pwamc/polynomial.hpp"
#include "pwamc/problem.hpp"

namespace pwamc {

struct PolicyConfig {
  double diameter = 0.01;  // partition diameter d(pi)
  double epsilon = 0.01;   // target tolerance on ||x - x_T||
  int max_steps = 100000;
  struct Integrator {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double min_step = 1e-14;
  } integrator;
  double event_tol = 0.0;  // 0: derived as min(1e-10, 1e-6 * diameter)

  double effective_event_tol() const {
    return event_tol > 0.0 ? event_tol : std::min(1e-10, 1e-6 * diameter);
  }
};

struct PartitionPoint {
  double t = 0.0;
  Eigen::VectorXd x;
  int cell = 0;
  Eigen::VectorXd u;
  double hamiltonian_value = 0.0;  // achieved min of grad(v).f + L
};

struct TrajectorySample {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  int cell = 0;
  double running_cost = 0.0;
  bool partition_point = false;
};

enum class RunStatus { ReachedTarget, MaxSteps, LeftDomain, NumericalFailure };
const char* to_string(RunStatus s);

struct PolicyRun {
  std::vector<PartitionPoint> points;
  std::vector<TrajectorySample> samples;
  double total_time = 0.0;
  double cost = 0.0;
  RunStatus status = RunStatus::NumericalFailure;
};

/// Gradient of the value-function approximation; the policy only ever needs
/// grad(v) at a point, so non-polynomial oracles plug in too.
using ValueGradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

ValueGradient polynomial_gradient(const Polynomial& v);

/// Global minimizer over the input box of
///   q(u) = grad_v . (A x + a + B u) + L(x, u).
/// Exact for m = 1 (companion-matrix real roots of dq/du plus endpoints);
/// multistart projected gradient for m >= 2. Ties go to the smallest-norm
/// minimizer, then lexicographic.
std::pair<Eigen::VectorXd, double> static_min(const Eigen::VectorXd& grad_v,
                                              const Cell& cell,
                                              const Eigen::VectorXd& x,
                                              const Box& input_box);

enum class HoldExit { BoundaryHit, BudgetExhausted, TargetProximity, StepUnderflow };

struct HoldResult {
  double t_end = 0.0;
  Eigen::VectorXd x_end;
  HoldExit exit = HoldExit::BudgetExhausted;
  std::vector<TrajectorySample> samples;  // accepted integrator steps
  double cost_increment = 0.0;            // trapezoid over accepted steps
};

/// Integrate xdot = A x + a + B u with constant u from (t0, x0) until a cell
/// guard changes sign (located by bisection within event_tol) or the time
/// budget runs out. Adaptive Dormand-Prince 4(5).
HoldResult integrate_hold(const PwaOcp& ocp, int cell, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& u, double t0, double budget,
                          const PolicyConfig& cfg);

/// The sample-and-hold synthesis loop: per interval a static polynomial
/// minimization, then a hold until boundary or diameter, re-classifying the
/// cell on boundary hits.
PolicyRun run_policy(const PwaOcp& ocp, const ValueGradient& grad_v,
                     const Eigen::VectorXd& x_target, const PolicyConfig& cfg,
                     std::optional<Eigen::VectorXd> x0 = std::nullopt);

PolicyRun run_policy(const PwaOcp& ocp, const Polynomial& v,
                     const Eigen::VectorXd& x_target, const PolicyConfig& cfg,
                     std::optional<Eigen::VectorXd> x0 = std::nullopt);

/// Recompute the accumulated cost of a run by composite trapezoid over the
/// dense samples plus the terminal cost; matches the online accumulation.
double accumulated_cost(const PolicyRun& run, const PwaOcp& ocp);

}  // namespace pwamc
