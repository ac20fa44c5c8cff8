#include "pwamc/policy.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pwamc {

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ReachedTarget: return "ReachedTarget";
    case RunStatus::MaxSteps: return "MaxSteps";
    case RunStatus::LeftDomain: return "LeftDomain";
    case RunStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

ValueGradient polynomial_gradient(const Polynomial& v) {
  const int n = v.nvars();
  std::vector<Polynomial> grad;
  grad.reserve(n);
  for (int i = 0; i < n; ++i) grad.push_back(v.partial_derivative(i));
  return [grad, n](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = grad[i].evaluate(x);
    return g;
  };
}

namespace {

// Real roots of a univariate polynomial given by ascending coefficients,
// via the companion matrix.
std::vector<double> real_roots(std::vector<double> coeff) {
  while (!coeff.empty() && coeff.back() == 0.0) coeff.pop_back();
  if (coeff.size() <= 1) return {};
  const int deg = static_cast<int>(coeff.size()) - 1;
  if (deg == 1) return {-coeff[0] / coeff[1]};
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) C(i, deg - 1) = -coeff[i] / coeff[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    const std::complex<double> z = es.eigenvalues()[i];
    if (std::abs(z.imag()) <= 1e-9 * (1.0 + std::abs(z.real())))
      roots.push_back(z.real());
  }
  return roots;
}

// The hold objective as a polynomial in u alone, for fixed x.
Polynomial hold_objective(const Eigen::VectorXd& grad_v, const Cell& cell,
                          const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(cell.B.cols());
  // L(x_j, u) as a polynomial in u
  Polynomial q = cell.lagrangian.partial_evaluate_prefix(x);
  // grad_v . (A x + a + B u)
  const double affine = grad_v.dot(cell.A * x + cell.a);
  q = q + Polynomial::constant(m, affine);
  const Eigen::VectorXd gB = cell.B.transpose() * grad_v;
  for (int k = 0; k < m; ++k)
    if (gB[k] != 0.0) q = q + Polynomial::variable(m, k, gB[k]);
  (void)n;
  return q;
}

bool better_minimizer(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  // Deterministic tie-break: smaller Euclidean norm, then lexicographic.
  const double na = a.norm(), nb = b.norm();
  if (std::abs(na - nb) > 1e-14) return na < nb;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

}  // namespace

std::pair<Eigen::VectorXd, double> static_min(const Eigen::VectorXd& grad_v,
                                              const Cell& cell,
                                              const Eigen::VectorXd& x,
                                              const Box& input_box) {
  const int m = static_cast<int>(cell.B.cols());
  const Polynomial q = hold_objective(grad_v, cell, x);

  if (m == 0) {
    Eigen::VectorXd u(0);
    return {u, q.evaluate(u)};
  }

  auto eval = [&](const Eigen::VectorXd& u) {
    const double v = q.evaluate(u);
    if (!std::isfinite(v))
      throw std::runtime_error("static_min: non-finite objective");
    return v;
  };

  std::vector<Eigen::VectorXd> candidates;
  if (m == 1) {
    // Exact: stationary points of q plus the interval endpoints.
    const int deg = std::max(q.degree(), 0);
    std::vector<double> coeff(deg + 1, 0.0);
    for (const auto& [mono, c] : q.terms()) coeff[mono.exponents[0]] = c;
    std::vector<double> dcoeff;
    for (int k = 1; k <= deg; ++k) dcoeff.push_back(k * coeff[k]);
    for (double rt : real_roots(dcoeff))
      if (rt >= input_box.lo[0] && rt <= input_box.hi[0])
        candidates.push_back(Eigen::VectorXd::Constant(1, rt));
    candidates.push_back(Eigen::VectorXd::Constant(1, input_box.lo[0]));
    candidates.push_back(Eigen::VectorXd::Constant(1, input_box.hi[0]));
  } else {
    // Multistart projected gradient from a 3^m lattice plus the box corners.
    std::vector<Polynomial> dq;
    for (int k = 0; k < m; ++k) dq.push_back(q.partial_derivative(k));
    auto project = [&](Eigen::VectorXd u) {
      for (int k = 0; k < m; ++k)
        u[k] = std::clamp(u[k], input_box.lo[k], input_box.hi[k]);
      return u;
    };
    auto refine = [&](Eigen::VectorXd u) {
      double fu = eval(u);
      double step = 0.5 * (input_box.hi - input_box.lo).maxCoeff();
      for (int it = 0; it < 200 && step > 1e-14; ++it) {
        Eigen::VectorXd gvec(m);
        for (int k = 0; k < m; ++k) gvec[k] = dq[k].evaluate(u);
        Eigen::VectorXd trial = project(u - step * gvec);
        const double ft = eval(trial);
        if (ft < fu - 1e-16) {
          u = trial;
          fu = ft;
        } else {
          step *= 0.5;
        }
      }
      return u;
    };
    std::vector<int> idx(m, 0);
    bool done = false;
    while (!done) {
      Eigen::VectorXd seed(m);
      for (int k = 0; k < m; ++k)
        seed[k] = input_box.lo[k] +
                  0.5 * idx[k] * (input_box.hi[k] - input_box.lo[k]);
      candidates.push_back(refine(seed));
      int k = 0;
      for (; k < m; ++k) {
        if (++idx[k] < 3) break;
        idx[k] = 0;
      }
      done = (k == m);
    }
  }

  Eigen::VectorXd best = candidates.front();
  double best_val = eval(best);
  for (const Eigen::VectorXd& u : candidates) {
    const double v = eval(u);
    if (v < best_val - 1e-12 * (1.0 + std::abs(best_val)) ||
        (std::abs(v - best_val) <= 1e-12 * (1.0 + std::abs(best_val)) &&
         better_minimizer(u, best))) {
      best = u;
      best_val = v;
    }
  }
  return {best, best_val};
}

namespace {

// Dormand-Prince 4(5) tableau.
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double kC[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kB5[7] = {35.0 / 384,     0.0,  500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,           7571.0 / 16695,
                           393.0 / 640,     -92097.0 / 339200,
                           187.0 / 2100,    1.0 / 40};

struct RkStep {
  Eigen::VectorXd x5;  // 5th-order solution
  double error;        // scaled error estimate
};

RkStep rk45_step(const Cell& cell, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& x, double h, double rel_tol,
                 double abs_tol) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd k(n, 7);
  for (int s = 0; s < 7; ++s) {
    Eigen::VectorXd xs = x;
    for (int j = 0; j < s; ++j) xs += h * kA[s][j] * k.col(j);
    k.col(s) = cell.dynamics(xs, u);
  }
  RkStep out;
  out.x5 = x;
  Eigen::VectorXd x4 = x;
  for (int s = 0; s < 7; ++s) {
    out.x5 += h * kB5[s] * k.col(s);
    x4 += h * kB4[s] * k.col(s);
  }
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sc = abs_tol + rel_tol * std::max(std::abs(x[i]), std::abs(out.x5[i]));
    err = std::max(err, std::abs(out.x5[i] - x4[i]) / sc);
  }
  out.error = err;
  return out;
}

double min_guard(const Cell& cell, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& u) {
  Eigen::VectorXd xu(x.size() + u.size());
  xu << x, u;
  double mn = std::numeric_limits<double>::infinity();
  for (const Polynomial& g : cell.guards) mn = std::min(mn, g.evaluate(xu));
  return mn;
}

}  // namespace

HoldResult integrate_hold(const PwaOcp& ocp, int cell_idx,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& u,
                          double t0, double budget, const PolicyConfig& cfg) {
  const Cell& cell = ocp.cells[cell_idx];
  const double ev_tol = cfg.effective_event_tol();

  HoldResult out;
  out.samples.push_back({t0, x0, u, cell_idx, 0.0, false});

  double t = 0.0;  // elapsed within this hold
  Eigen::VectorXd x = x0;
  double h = std::min(budget, 0.1);
  double cost = 0.0;
  double L_prev = cell.lagrangian.evaluate(
      (Eigen::VectorXd(ocp.n + ocp.m) << x, u).finished());

  auto push_sample = [&](double tt, const Eigen::VectorXd& xx) {
    Eigen::VectorXd xu(ocp.n + ocp.m);
    xu << xx, u;
    const double L = cell.lagrangian.evaluate(xu);
    cost += 0.5 * (L_prev + L) * (tt - t);
    L_prev = L;
    out.samples.push_back({t0 + tt, xx, u, cell_idx, cost, false});
  };

  // Integrate one accepted adaptive step at a time; on a guard sign change,
  // bisect the step until the crossing is located within ev_tol.
  while (t < budget) {
    h = std::min(h, budget - t);
    if (h < cfg.integrator.min_step) {
      out.t_end = t0 + t;
      out.x_end = x;
      out.exit = HoldExit::StepUnderflow;
      out.cost_increment = cost;
      return out;
    }
    RkStep step = rk45_step(cell, u, x, h, cfg.integrator.rel_tol,
                            cfg.integrator.abs_tol);
    if (step.error > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(step.error, -0.2));
      continue;
    }

    if (min_guard(cell, step.x5, u) < 0.0) {
      // Bracketed a boundary inside (t, t + h]: bisect on the sub-step
      // length, re-integrating from x each time (affine dynamics keep this
      // cheap), until the state increment is below the event tolerance.
      double lo = 0.0, hi = h;
      Eigen::VectorXd x_hi = step.x5;
      while (true) {
        const Eigen::VectorXd x_lo =
            lo == 0.0 ? x
                      : rk45_step(cell, u, x, lo, cfg.integrator.rel_tol,
                                  cfg.integrator.abs_tol).x5;
        if ((x_hi - x_lo).norm() <= ev_tol || hi - lo < cfg.integrator.min_step)
          break;
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd x_mid =
            rk45_step(cell, u, x, mid, cfg.integrator.rel_tol,
                      cfg.integrator.abs_tol).x5;
        if (min_guard(cell, x_mid, u) < 0.0) {
          hi = mid;
          x_hi = x_mid;
        } else {
          lo = mid;
        }
      }
      const Eigen::VectorXd x_event = x_hi;
      push_sample(t + hi, x_event);
      out.t_end = t0 + t + hi;
      out.x_end = x_event;
      out.exit = HoldExit::BoundaryHit;
      out.cost_increment = cost;
      out.samples.back().partition_point = false;
      return out;
    }

    push_sample(t + h, step.x5);
    t += h;
    x = step.x5;
    h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(step.error, 1e-10), -0.2)));
  }

  out.t_end = t0 + budget;
  out.x_end = x;
  out.exit = HoldExit::BudgetExhausted;
  out.cost_increment = cost;
  return out;
}

PolicyRun run_policy(const PwaOcp& ocp, const ValueGradient& grad_v,
                     const Eigen::VectorXd& x_target, const PolicyConfig& cfg,
                     std::optional<Eigen::VectorXd> x0_opt) {
  PolicyRun run;
  if (!x0_opt && ocp.initial.kind != InitialMeasure::Kind::Dirac)
    throw std::invalid_argument("run_policy: no initial state available");
  Eigen::VectorXd x = x0_opt ? *x0_opt : ocp.initial.point;
  double t = 0.0;
  Eigen::VectorXd u_prev = Eigen::VectorXd::Zero(ocp.m);
  int boundary_streak = 0;

  run.samples.push_back({t, x, u_prev, 0, 0.0, true});

  for (int step = 0; step < cfg.max_steps; ++step) {
    if ((x - x_target).norm() <= cfg.epsilon) {
      run.status = RunStatus::ReachedTarget;
      run.total_time = t;
      run.cost += ocp.terminal_cost.evaluate(x);
      return run;
    }
    if (!ocp.state_box.contains(x, 10.0 * cfg.effective_event_tol())) {
      run.status = RunStatus::LeftDomain;
      run.total_time = t;
      return run;
    }

    int cell;
    try {
      cell = classify_cell(ocp, x, u_prev);
    } catch (const std::exception&) {
      run.status = RunStatus::LeftDomain;
      run.total_time = t;
      return run;
    }

    auto [u, hval] = static_min(grad_v(x), ocp.cells[cell], x, ocp.input_box);
    run.points.push_back({t, x, cell, u, hval});
    if (!run.samples.empty()) run.samples.back().partition_point = true;

    HoldResult hold = integrate_hold(ocp, cell, x, u, t, cfg.diameter, cfg);
    if (hold.exit == HoldExit::StepUnderflow) {
      run.status = RunStatus::NumericalFailure;
      run.total_time = hold.t_end;
      return run;
    }
    for (std::size_t i = 1; i < hold.samples.size(); ++i) {
      TrajectorySample s = hold.samples[i];
      s.running_cost += run.cost;
      run.samples.push_back(std::move(s));
    }
    run.cost += hold.cost_increment;

    // Zeno guard: many boundary hits without measurable time progress.
    if (hold.exit == HoldExit::BoundaryHit && hold.t_end - t < 1e-12) {
      if (++boundary_streak > 100) {
        run.status = RunStatus::NumericalFailure;
        run.total_time = hold.t_end;
        return run;
      }
    } else {
      boundary_streak = 0;
    }

    t = hold.t_end;
    x = hold.x_end;
    u_prev = u;
  }

  run.status = RunStatus::MaxSteps;
  run.total_time = t;
  return run;
}

PolicyRun run_policy(const PwaOcp& ocp, const Polynomial& v,
                     const Eigen::VectorXd& x_target, const PolicyConfig& cfg,
                     std::optional<Eigen::VectorXd> x0) {
  if (v.degree() < 1)
    throw std::invalid_argument("run_policy: value function must have degree >= 1");
  return run_policy(ocp, polynomial_gradient(v), x_target, cfg, std::move(x0));
}

double accumulated_cost(const PolicyRun& run, const PwaOcp& ocp) {
  if (run.samples.empty())
    throw std::invalid_argument("accumulated_cost: run has no samples");
  double J = 0.0;
  for (std::size_t i = 1; i < run.samples.size(); ++i) {
    const TrajectorySample& a = run.samples[i - 1];
    const TrajectorySample& b = run.samples[i];
    // Control is constant within an interval; use the incoming sample's cell
    // and the held control of the right endpoint.
    Eigen::VectorXd xua(ocp.n + ocp.m), xub(ocp.n + ocp.m);
    xua << a.x, b.u;
    xub << b.x, b.u;
    const Polynomial& L = ocp.cells[b.cell].lagrangian;
    J += 0.5 * (L.evaluate(xua) + L.evaluate(xub)) * (b.t - a.t);
  }
  if (run.status == RunStatus::ReachedTarget)
    J += ocp.terminal_cost.evaluate(run.samples.back().x);
  return J;
}

}  // namespace pwamc
