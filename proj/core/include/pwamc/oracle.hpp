#pragma once

#include <array>
#include <vector>

#include "pwamc/policy.hpp"
#include "pwamc/relaxation.hpp"

namespace pwamc::oracle {

/// Closed-form optimal feedback for the built-in example. Continuous at
/// x = 0, where both branches evaluate to sqrt(3) - 1.
double analytic_feedback(double x);

/// Closed-form optimal cost-to-go v*(x). On x >= 0 this is
/// (sqrt(3) - 1) (x - 1)^2; on x < 0 it is obtained by integrating the
/// HJB-derived v*'(x) = 2(x+1) - 2 sqrt(3x^2 - 2x + 3) from 0 down to x
/// (closed-form antiderivative), glued continuously at 0.
double analytic_value(double x);
double analytic_value_derivative(double x);

/// v*' wrapped as a ValueGradient so run_policy can consume the exact
/// (non-polynomial) value function.
ValueGradient analytic_value_gradient();

/// High-accuracy cost of the closed loop xdot = f_i(x, k*(x)) from x0,
/// accumulating 2(x-1)^2 + k*(x)^2 until |x - 1| <= 1e-8, Richardson
/// extrapolated, with the exact cell-1 value as the tail. Cross-checked
/// against the closed-form cell-1 value whenever x0 >= 0.
double oracle_cost(double x0, double tol = 1e-10);

struct ComparisonPoint {
  double x = 0.0;
  double u_policy = 0.0;
  double u_oracle = 0.0;
};

struct ComparisonReport {
  double oracle_cost = 0.0;       // v*(x0)
  double lower_bound = 0.0;       // relaxation value at the compared order
  double policy_cost = 0.0;       // accumulated cost of the run
  double bound_gap = 0.0;         // oracle_cost - lower_bound
  double cost_gap = 0.0;          // policy_cost - oracle_cost
  double feedback_sup_dev = 0.0;  // max_j |u_j - k*(x_j)|
  std::vector<ComparisonPoint> points;
};

/// Quantify how a hierarchy order and a synthesized run bracket the oracle.
/// Throws if the run does not start at x0.
ComparisonReport compare(const OrderResult& hier, const PolicyRun& run,
                         double x0);

/// (x, k*(x)) samples over [lo, hi], for plot-ready data files.
std::vector<std::array<double, 2>> feedback_curve(double lo, double hi,
                                                  int samples);

}  // namespace pwamc::oracle
