#include "pwamc/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace pwamc::oracle {

namespace {
const double kSqrt3 = std::sqrt(3.0);

// Antiderivative of v*'(s) = 2(s+1) - 2 sqrt(3 s^2 - 2 s + 3):
// complete the square, 3 s^2 - 2 s + 3 = 3 ((s - 1/3)^2 + 8/9).
double value_antiderivative(double s) {
  const double t = s - 1.0 / 3.0;
  const double r = std::sqrt(3.0 * s * s - 2.0 * s + 3.0);
  return (s + 1.0) * (s + 1.0) - t * r -
         (8.0 * kSqrt3 / 9.0) * std::log(t + std::sqrt(t * t + 8.0 / 9.0));
}
}  // namespace

double analytic_feedback(double x) {
  if (x >= 0.0) return (1.0 - kSqrt3) * (x - 1.0);
  return -x - 1.0 +
         std::sqrt(2.0 * (x - 1.0) * (x - 1.0) + (x + 1.0) * (x + 1.0));
}

double analytic_value(double x) {
  if (x >= 0.0) return (kSqrt3 - 1.0) * (x - 1.0) * (x - 1.0);
  return (kSqrt3 - 1.0) + value_antiderivative(x) - value_antiderivative(0.0);
}

double analytic_value_derivative(double x) {
  if (x >= 0.0) return 2.0 * (kSqrt3 - 1.0) * (x - 1.0);
  return 2.0 * (x + 1.0) - 2.0 * std::sqrt(3.0 * x * x - 2.0 * x + 3.0);
}

ValueGradient analytic_value_gradient() {
  return [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, analytic_value_derivative(x[0]))
        .eval();
  };
}

namespace {

// Closed-loop right-hand side and running cost under the analytic feedback.
void closed_loop(double x, double& f, double& L) {
  const double u = analytic_feedback(x);
  f = (x >= 0.0 ? -x : x) + 1.0 + u;
  L = 2.0 * (x - 1.0) * (x - 1.0) + u * u;
}

// Fixed-step RK4 on the augmented state (x, J) until |x - 1| <= 1e-8,
// then the exact cell-1 value as the tail.
double integrate_cost(double x0, double h) {
  double x = x0, J = 0.0, t = 0.0;
  while (std::abs(x - 1.0) > 1e-8) {
    double f1, L1, f2, L2, f3, L3, f4, L4;
    closed_loop(x, f1, L1);
    closed_loop(x + 0.5 * h * f1, f2, L2);
    closed_loop(x + 0.5 * h * f2, f3, L3);
    closed_loop(x + h * f3, f4, L4);
    x += h / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    J += h / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4);
    t += h;
    if (t > 100.0)
      throw std::runtime_error("oracle_cost: closed loop did not converge");
  }
  return J + (kSqrt3 - 1.0) * (x - 1.0) * (x - 1.0);
}

}  // namespace

double oracle_cost(double x0, double tol) {
  if (x0 < -2.0 || x0 > 2.0)
    throw std::invalid_argument("oracle_cost: x0 outside [-2, 2]");
  const double h = std::clamp(std::pow(tol, 0.25), 1e-4, 1e-2);
  const double coarse = integrate_cost(x0, h);
  const double fine = integrate_cost(x0, 0.5 * h);
  const double J = (16.0 * fine - coarse) / 15.0;  // Richardson, order 4
  if (x0 >= 0.0) {
    const double closed = (kSqrt3 - 1.0) * (x0 - 1.0) * (x0 - 1.0);
    if (std::abs(J - closed) > 1e-6 * (1.0 + closed))
      throw std::runtime_error(
          "oracle_cost: integration disagrees with the closed form");
  }
  return J;
}

ComparisonReport compare(const OrderResult& hier, const PolicyRun& run,
                         double x0) {
  if (run.points.empty())
    throw std::invalid_argument("compare: run has no partition points");
  if (std::abs(run.points.front().x[0] - x0) > 1e-9)
    throw std::invalid_argument("compare: run does not start at x0");

  ComparisonReport rep;
  rep.oracle_cost = oracle_cost(x0);
  rep.lower_bound = hier.value.lower_bound;
  rep.policy_cost = run.cost;
  rep.bound_gap = rep.oracle_cost - rep.lower_bound;
  rep.cost_gap = rep.policy_cost - rep.oracle_cost;
  for (const PartitionPoint& p : run.points) {
    ComparisonPoint cp;
    cp.x = p.x[0];
    cp.u_policy = p.u[0];
    cp.u_oracle = analytic_feedback(cp.x);
    rep.feedback_sup_dev =
        std::max(rep.feedback_sup_dev, std::abs(cp.u_policy - cp.u_oracle));
    rep.points.push_back(cp);
  }
  return rep;
}

std::vector<std::array<double, 2>> feedback_curve(double lo, double hi,
                                                  int samples) {
  if (samples < 2) throw std::invalid_argument("feedback_curve: samples < 2");
  std::vector<std::array<double, 2>> out;
  out.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * i / (samples - 1);
    out.push_back({x, analytic_feedback(x)});
  }
  return out;
}

}  // namespace pwamc::oracle
