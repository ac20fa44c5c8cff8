// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Everything runs on the built-in two-cell example against the
// analytic oracle.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <pwamc/moments.hpp>
#include <pwamc/oracle.hpp>
#include <pwamc/policy.hpp>
#include <pwamc/problem.hpp>
#include <pwamc/relaxation.hpp>
#include <pwamc/sdp.hpp>

using namespace pwamc;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %d (%s): %s  [%s]\n", idx, name.c_str(),
              ok ? "pass" : "FAIL", detail.c_str());
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

}  // namespace

int main() {
  const PwaOcp ocp = builtin_example();
  const double x0 = -1.0;
  const double oracle_value = oracle::oracle_cost(x0);

  // Criteria 1-3 share one hierarchy solve d = 1..6.
  const auto t_hier = Clock::now();
  std::vector<OrderResult> hier = hierarchy(ocp, 6);
  const double hier_seconds = seconds_since(t_hier);

  // --- 1: monotone bounds below the oracle, under 60 s. -------------------
  {
    bool ok = hier.size() == 6 && hier_seconds < 60.0;
    double worst_drop = 0.0, worst_excess = -1e300;
    for (std::size_t i = 0; i < hier.size(); ++i) {
      if (hier[i].solution.status != SolveStatus::Optimal) ok = false;
      if (i > 0)
        worst_drop = std::max(worst_drop, hier[i - 1].value.lower_bound -
                                              hier[i].value.lower_bound);
      worst_excess =
          std::max(worst_excess, hier[i].value.lower_bound - oracle_value);
    }
    ok = ok && worst_drop <= 1e-6 && worst_excess <= 1e-4;
    report(1, "hierarchy monotonicity", ok,
           fmt("bounds d=1..6: %.6f..%.6f, worst drop %.1e, excess over oracle "
               "%.1e, %.1fs",
               hier.front().value.lower_bound, hier.back().value.lower_bound,
               worst_drop, worst_excess, hier_seconds));
  }

  // --- 2: d = 6 bound within 5% of the oracle. ----------------------------
  {
    const double bound = hier.back().value.lower_bound;
    const double rel = (oracle_value - bound) / oracle_value;
    report(2, "bound quality at d=6", rel <= 0.05 && rel >= -1e-4,
           fmt("bound %.6f vs oracle %.6f, relative gap %.2f%%", bound,
               oracle_value, 100.0 * rel));
  }

  // --- 3: Putinar certificate and sampled HJB subsolution. ----------------
  {
    bool ok = true;
    double worst_ratio = 0.0, worst_hjb = 0.0;
    for (const OrderResult& r : hier) {
      double max_coeff = 0.0;
      for (const auto& [mono, c] : r.value.v.terms())
        max_coeff = std::max(max_coeff, std::abs(c));
      const double thresh = 1e-6 * (1.0 + max_coeff);
      double resid = r.certificate.terminal_residual;
      for (double cr : r.certificate.cell_residuals) resid = std::max(resid, cr);
      worst_ratio = std::max(worst_ratio, resid / thresh);
      worst_hjb = std::min(worst_hjb, r.certificate.hjb_min);
      if (resid > thresh || r.certificate.hjb_min < -1e-4) ok = false;
    }
    report(3, "Putinar certificate + HJB grid", ok,
           fmt("worst residual/threshold %.2e, worst sampled HJB min %.2e",
               worst_ratio, worst_hjb));
  }

  // --- 4: synthesis from the d=6 value function. ---------------------------
  {
    Eigen::VectorXd xT(1);
    xT << 1.0;
    PolicyConfig cfg;
    cfg.diameter = 0.01;
    cfg.epsilon = 0.01;
    const auto t0 = Clock::now();
    PolicyRun run = run_policy(ocp, hier.back().value.v, xT, cfg);
    const double secs = seconds_since(t0);
    double dev = 0.0;
    for (const auto& p : run.points)
      dev = std::max(dev, std::abs(p.u[0] - oracle::analytic_feedback(p.x[0])));
    const double cost_rel = std::abs(run.cost - oracle_value) / oracle_value;
    const bool ok = run.status == RunStatus::ReachedTarget && cost_rel <= 0.10 &&
                    dev <= 0.1 && secs < 5.0;
    report(4, "synthesis fidelity", ok,
           fmt("%s, J %.6f (%.2f%% off oracle), feedback dev %.3f, %.2fs",
               to_string(run.status), run.cost, 100.0 * cost_rel, dev, secs));
  }

  // --- 5: exact-feedback reproduction. -------------------------------------
  {
    Eigen::VectorXd xT(1);
    xT << 1.0;
    PolicyConfig cfg;
    cfg.diameter = 1e-3;
    cfg.epsilon = 1e-3;
    PolicyRun run = run_policy(ocp, oracle::analytic_value_gradient(), xT, cfg);
    double dev = 0.0;
    for (const auto& p : run.points)
      dev = std::max(dev, std::abs(p.u[0] - oracle::analytic_feedback(p.x[0])));
    const double cost_err = std::abs(run.cost - oracle_value);
    const bool ok = run.status == RunStatus::ReachedTarget && dev <= 1e-6 &&
                    cost_err <= 1e-4;
    report(5, "exact-feedback reproduction", ok,
           fmt("%s, feedback dev %.2e, |J - oracle| %.2e", to_string(run.status),
               dev, cost_err));
  }

  // --- 6: refinement under diameter halving. -------------------------------
  {
    Eigen::VectorXd xT(1);
    xT << 1.0;
    bool ok = true;
    double prev_err = 1e300;
    std::string detail;
    for (double dia : {0.1, 0.05, 0.025, 0.0125}) {
      PolicyConfig cfg;
      cfg.diameter = dia;
      cfg.epsilon = 0.01;
      PolicyRun run = run_policy(ocp, hier.back().value.v, xT, cfg);
      if (run.status != RunStatus::ReachedTarget) ok = false;
      const double err = std::abs(run.cost - oracle_value);
      if (err > prev_err + 1e-3) ok = false;
      detail += fmt("%s%.1e", detail.empty() ? "" : " -> ", err);
      prev_err = err;
    }
    report(6, "diameter refinement", ok, "|J - oracle|: " + detail);
  }

  // --- 7: the three analytic conic programs. -------------------------------
  {
    bool ok = true;
    std::string detail;
    std::vector<std::pair<std::string, ConicProgram>> progs;
    {
      ConicProgram p;  // min y s.t. [[1, y], [y, 1]] PSD -> -1
      p.nvar = 1;
      p.c = Eigen::VectorXd::Ones(1);
      p.F = Eigen::MatrixXd(0, 1);
      p.g = Eigen::VectorXd(0);
      LmiBlock b;
      b.side = 2;
      b.constant = Eigen::MatrixXd::Identity(2, 2);
      b.terms = {{0, 0, 1, 1.0}};
      p.blocks.push_back(b);
      progs.push_back({"edge", p});
    }
    {
      ConicProgram p;  // min 0, nvar = 1, unconstrained -> 0
      p.nvar = 1;
      p.c = Eigen::VectorXd::Zero(1);
      p.F = Eigen::MatrixXd(0, 1);
      p.g = Eigen::VectorXd(0);
      progs.push_back({"free", p});
    }
    {
      ConicProgram p;  // min y1 + y2 s.t. y1 = 1, diag(y1, y2) PSD -> 1
      p.nvar = 2;
      p.c = Eigen::VectorXd::Ones(2);
      p.F = Eigen::MatrixXd(1, 2);
      p.F << 1, 0;
      p.g = Eigen::VectorXd::Ones(1);
      LmiBlock b;
      b.side = 2;
      b.constant = Eigen::MatrixXd::Zero(2, 2);
      b.terms = {{0, 0, 0, 1.0}, {1, 1, 1, 1.0}};
      p.blocks.push_back(b);
      progs.push_back({"corner", p});
    }
    for (auto& [name, p] : progs) {
      SolveOptions opts;
      opts.tol = 1e-9;  // pinned at gap <= 1e-8 absolute
      ConicSolution s = solve(p, opts);
      ResidualReport rep = residuals(p, s);
      const bool this_ok = s.status == SolveStatus::Optimal && s.gap <= 1e-8 &&
                           std::abs(rep.duality_gap - s.gap) <= 1e-10 &&
                           rep.eq_infeasibility <= 1e-8 &&
                           rep.dual_infeasibility <= 1e-8;
      if (!this_ok) ok = false;
      detail += fmt("%s%s gap %.1e", detail.empty() ? "" : ", ", name.c_str(),
                    s.gap);
    }
    report(7, "analytic SDP suite", ok, detail);
  }

  // --- 8: moment machinery. -------------------------------------------------
  {
    bool ok = true;
    // Dirac moments: exact equality.
    InitialMeasure dirac;
    dirac.kind = InitialMeasure::Kind::Dirac;
    dirac.point = Eigen::VectorXd(1);
    dirac.point << -1.0;
    auto b1 = std::make_shared<MomentBasis>(1, 3);
    MomentVector yd = analytic_moments(dirac, b1);
    for (int k = 0; k <= 6; ++k)
      if (yd.values[b1->position(Monomial(std::vector<int>{k}))] != std::pow(-1.0, k)) ok = false;

    // Uniform moments to 1e-12.
    InitialMeasure uni;
    uni.kind = InitialMeasure::Kind::UniformBox;
    uni.lo = Eigen::VectorXd(1);
    uni.hi = Eigen::VectorXd(1);
    uni.lo << -1.0;
    uni.hi << 2.0;
    MomentVector yu = analytic_moments(uni, b1);
    for (int k = 0; k <= 6; ++k) {
      const double exact = (std::pow(2.0, k + 1) - std::pow(-1.0, k + 1)) /
                           ((k + 1) * 3.0);
      if (std::abs(yu.values[b1->position(Monomial(std::vector<int>{k}))] - exact) > 1e-12)
        ok = false;
    }

    // Quadratic-form identity on 100 random instances.
    std::mt19937 rng(97);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int nv = 1 + trial % 3;
      const int d = 1 + trial % 3;
      auto basis = std::make_shared<MomentBasis>(nv, d);
      MomentVector y;
      y.basis = basis;
      y.values = Eigen::VectorXd::NullaryExpr(basis->size(),
                                              [&](Eigen::Index) { return u(rng); });
      MatrixTemplate M = build_moment_template(basis, d);
      const auto low = monomials_up_to(nv, d);
      Eigen::VectorXd qv(low.size());
      Polynomial q(nv);
      for (std::size_t i = 0; i < low.size(); ++i) {
        qv[i] = u(rng);
        q = q + Polynomial::term(low[i], qv[i]);
      }
      const double lhs = qv.dot(M.instantiate(y) * qv);
      const double rhs = riesz(y, q * q);
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
    ok = ok && worst <= 1e-10;
    report(8, "moment machinery", ok,
           fmt("worst quadratic-form mismatch %.2e", worst));
  }

  // --- 9: integrator against the affine closed form. ------------------------
  {
    Eigen::VectorXd x0v(1), u(1);
    x0v << 0.5;
    u << 0.0;
    PolicyConfig cfg;
    HoldResult h = integrate_hold(ocp, 0, x0v, u, 0.0, 2.0, cfg);
    double max_err = 0.0;
    for (const auto& s : h.samples)
      max_err = std::max(max_err,
                         std::abs(s.x[0] - (1.0 - 0.5 * std::exp(-s.t))));

    u << -1.6;  // x(t) = -0.6 + 1.1 e^{-t}, crosses x = 0 at ln(1.1/0.6)
    HoldResult hc = integrate_hold(ocp, 0, x0v, u, 0.0, 5.0, cfg);
    const double cross_err = std::abs(hc.t_end - std::log(1.1 / 0.6));
    const bool ok = h.exit == HoldExit::BudgetExhausted && max_err <= 1e-8 &&
                    hc.exit == HoldExit::BoundaryHit && cross_err <= 1e-9;
    report(9, "integrator accuracy", ok,
           fmt("max trajectory error %.2e, crossing error %.2e", max_err,
               cross_err));
  }

  if (failures == 0)
    std::printf("all 9 acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
