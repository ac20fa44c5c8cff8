#include "pwamc/relaxation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pwamc {

using nlohmann::json;
using nlohmann::ordered_json;

UnitBoxScaling unit_box_scaling(const PwaOcp& ocp) {
  UnitBoxScaling s;
  s.Sx = 0.5 * (ocp.state_box.hi - ocp.state_box.lo);
  s.cx = 0.5 * (ocp.state_box.hi + ocp.state_box.lo);
  s.Su = 0.5 * (ocp.input_box.hi - ocp.input_box.lo);
  s.cu = 0.5 * (ocp.input_box.hi + ocp.input_box.lo);
  return s;
}

UnitBoxScaling identity_scaling(const PwaOcp& ocp) {
  UnitBoxScaling s;
  s.Sx = Eigen::VectorXd::Ones(ocp.n);
  s.cx = Eigen::VectorXd::Zero(ocp.n);
  s.Su = Eigen::VectorXd::Ones(ocp.m);
  s.cu = Eigen::VectorXd::Zero(ocp.m);
  s.identity = true;
  return s;
}

namespace {
Polynomial transform_xu(const Polynomial& p, const UnitBoxScaling& s, int n, int m) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + m, n + m);
  Eigen::VectorXd c(n + m);
  for (int i = 0; i < n; ++i) {
    S(i, i) = s.Sx[i];
    c[i] = s.cx[i];
  }
  for (int i = 0; i < m; ++i) {
    S(n + i, n + i) = s.Su[i];
    c[n + i] = s.cu[i];
  }
  return p.substitute_affine(S, c);
}

Polynomial transform_x(const Polynomial& p, const UnitBoxScaling& s, int n) {
  Eigen::MatrixXd S = Eigen::MatrixXd(s.Sx.asDiagonal());
  return p.substitute_affine(S, s.cx);
}
}  // namespace

PwaOcp apply_scaling(const PwaOcp& ocp, const UnitBoxScaling& s) {
  if (s.identity) return ocp;
  PwaOcp out = ocp;
  const Eigen::VectorXd SxInv = s.Sx.cwiseInverse();
  for (std::size_t ci = 0; ci < out.cells.size(); ++ci) {
    const Cell& orig = ocp.cells[ci];
    Cell& cell = out.cells[ci];
    cell.a = SxInv.asDiagonal() * (orig.A * s.cx + orig.a + orig.B * s.cu);
    cell.A = SxInv.asDiagonal() * orig.A * Eigen::MatrixXd(s.Sx.asDiagonal());
    cell.B = SxInv.asDiagonal() * orig.B * Eigen::MatrixXd(s.Su.asDiagonal());
    cell.lagrangian = transform_xu(orig.lagrangian, s, ocp.n, ocp.m);
    for (Polynomial& g : cell.guards) g = transform_xu(g, s, ocp.n, ocp.m);
  }
  out.terminal_cost = transform_x(ocp.terminal_cost, s, ocp.n);
  for (std::size_t i = 0; i < out.terminal_guards.size(); ++i)
    out.terminal_guards[i] = transform_x(ocp.terminal_guards[i], s, ocp.n);
  if (ocp.initial.kind == InitialMeasure::Kind::Dirac) {
    out.initial.point = SxInv.asDiagonal() * (ocp.initial.point - s.cx);
  } else {
    out.initial.lo = SxInv.asDiagonal() * (ocp.initial.lo - s.cx);
    out.initial.hi = SxInv.asDiagonal() * (ocp.initial.hi - s.cx);
  }
  out.state_box.lo = Eigen::VectorXd::Constant(ocp.n, -1.0);
  out.state_box.hi = Eigen::VectorXd::Constant(ocp.n, 1.0);
  out.input_box.lo = Eigen::VectorXd::Constant(ocp.m, -1.0);
  out.input_box.hi = Eigen::VectorXd::Constant(ocp.m, 1.0);
  return out;
}

Polynomial unscale_value(const Polynomial& v_scaled, const UnitBoxScaling& s) {
  if (s.identity) return v_scaled;
  Eigen::MatrixXd S = Eigen::MatrixXd(s.Sx.cwiseInverse().asDiagonal());
  Eigen::VectorXd c = -(s.Sx.cwiseInverse().cwiseProduct(s.cx));
  return v_scaled.substitute_affine(S, c);
}

int minimum_order(const PwaOcp& ocp) {
  int maxdeg = 1;  // dynamics contribute degree 1
  for (const Cell& c : ocp.cells) {
    maxdeg = std::max(maxdeg, c.lagrangian.degree());
    for (const Polynomial& g : c.guards) maxdeg = std::max(maxdeg, g.degree());
  }
  maxdeg = std::max(maxdeg, ocp.terminal_cost.degree());
  for (const Polynomial& g : ocp.terminal_guards)
    maxdeg = std::max(maxdeg, g.degree());
  return (maxdeg + 1) / 2;
}

namespace {
std::vector<Polynomial> box_guards(int nvars, int first, const Box& box) {
  // lo <= x_k <= hi as two degree-1 guards per coordinate.
  std::vector<Polynomial> gs;
  for (int k = 0; k < box.dim(); ++k) {
    gs.push_back(Polynomial::variable(nvars, first + k) -
                 Polynomial::constant(nvars, box.lo[k]));
    gs.push_back(Polynomial::constant(nvars, box.hi[k]) -
                 Polynomial::variable(nvars, first + k));
  }
  return gs;
}

void add_block_from_template(ConicProgram& prog, const MatrixTemplate& t,
                             int var_offset) {
  LmiBlock b;
  b.side = t.side();
  b.constant = Eigen::MatrixXd::Zero(t.side(), t.side());
  for (int i = 0; i < t.side(); ++i)
    for (int j = i; j < t.side(); ++j)
      for (const MatrixTemplate::EntryTerm& e : t.entry(i, j))
        b.terms.push_back({var_offset + e.position, i, j, e.coeff});
  prog.blocks.push_back(std::move(b));
}
}  // namespace

std::optional<Eigen::VectorXd> point_target(const PwaOcp& ocp) {
  const int n = ocp.n;
  // Read each degree-1 guard as w.x + b >= 0.
  std::vector<Eigen::VectorXd> ws;
  std::vector<double> bs;
  for (const Polynomial& g : ocp.terminal_guards) {
    if (g.degree() > 1) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    double b = 0.0;
    for (const auto& [mono, c] : g.terms()) {
      if (mono.degree() == 0) {
        b = c;
      } else {
        for (int k = 0; k < n; ++k)
          if (mono.exponents[k] == 1) w[k] = c;
      }
    }
    ws.push_back(std::move(w));
    bs.push_back(b);
  }

  // Opposing pairs w.x + b >= 0, -t(w.x + b) >= 0 (t > 0) force equality.
  std::vector<int> eqs;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i].norm() == 0.0) continue;
    for (std::size_t j = i + 1; j < ws.size(); ++j) {
      const double t = -ws[j].norm() / ws[i].norm();
      if ((ws[j] - t * ws[i]).cwiseAbs().maxCoeff() <=
              1e-12 * ws[i].cwiseAbs().maxCoeff() &&
          std::abs(bs[j] - t * bs[i]) <= 1e-12 * (1.0 + std::abs(bs[i]))) {
        eqs.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  if (eqs.empty()) return std::nullopt;

  Eigen::MatrixXd W(eqs.size(), n);
  Eigen::VectorXd rhs(eqs.size());
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    W.row(i) = ws[eqs[i]].transpose();
    rhs[i] = -bs[eqs[i]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) return std::nullopt;
  const Eigen::VectorXd xT = qr.solve(rhs);
  if ((W * xT - rhs).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;

  // Every terminal guard must hold at the candidate point.
  for (const Polynomial& g : ocp.terminal_guards)
    if (g.evaluate(xT) < -kGuardTol) return std::nullopt;
  if (!ocp.state_box.contains(xT, kGuardTol)) return std::nullopt;
  return xT;
}

LmiRelaxation assemble(const PwaOcp& ocp, int d) {
  if (d < minimum_order(ocp))
    throw std::invalid_argument("assemble: order below minimum_order");

  LmiRelaxation rel;
  rel.d = d;
  const int r = static_cast<int>(ocp.cells.size());
  const int nxu = ocp.n + ocp.m;

  auto cell_basis = std::make_shared<const MomentBasis>(nxu, d);
  auto term_basis = std::make_shared<const MomentBasis>(ocp.n, d);

  // Variable layout: cell measures first, terminal measure last.
  int offset = 0;
  for (int i = 0; i < r; ++i) {
    LmiRelaxation::MeasureLayout lay;
    lay.offset = offset;
    lay.basis = cell_basis;
    lay.guards = ocp.cells[i].guards;
    for (const Polynomial& g : box_guards(nxu, 0, ocp.state_box))
      lay.guards.push_back(g);
    for (const Polynomial& g : box_guards(nxu, ocp.n, ocp.input_box))
      lay.guards.push_back(g);
    rel.measures.push_back(std::move(lay));
    offset += cell_basis->size();
  }
  rel.terminal_point = point_target(ocp);
  {
    LmiRelaxation::MeasureLayout lay;
    lay.offset = offset;
    if (rel.terminal_point) {
      // Point target: the terminal measure is m * delta_{x_T}; only the
      // mass m remains a variable.
      lay.basis = std::make_shared<const MomentBasis>(ocp.n, 0);
      offset += 1;
    } else {
      lay.basis = term_basis;
      lay.guards = ocp.terminal_guards;
      for (const Polynomial& g : box_guards(ocp.n, 0, ocp.state_box))
        lay.guards.push_back(g);
      offset += term_basis->size();
    }
    rel.measures.push_back(std::move(lay));
  }
  rel.program.nvar = offset;

  // Objective: sum_i l_{y_i}(L_i) + l_{y_T}(L_T).
  rel.program.c = Eigen::VectorXd::Zero(rel.program.nvar);
  for (int i = 0; i < r; ++i)
    for (const auto& [mono, coeff] : ocp.cells[i].lagrangian.terms())
      rel.program.c[rel.measures[i].offset + cell_basis->position(mono)] += coeff;
  if (rel.terminal_point) {
    rel.program.c[rel.measures[r].offset] +=
        ocp.terminal_cost.evaluate(*rel.terminal_point);
  } else {
    for (const auto& [mono, coeff] : ocp.terminal_cost.terms())
      rel.program.c[rel.measures[r].offset + term_basis->position(mono)] += coeff;
  }

  // One equality per test monomial x^beta, |beta| <= 2d:
  //   sum_i l_{y_i}(F_i(x^beta)) + l_{y_T}(x^beta) = l_{y_0}(x^beta).
  rel.row_monomials = monomials_up_to(ocp.n, 2 * d);
  const int neq = static_cast<int>(rel.row_monomials.size());
  rel.program.F = Eigen::MatrixXd::Zero(neq, rel.program.nvar);
  rel.program.g.resize(neq);
  const MomentVector y0 = analytic_moments(ocp.initial, term_basis);
  for (int row = 0; row < neq; ++row) {
    const Monomial& beta = rel.row_monomials[row];
    const Polynomial test = Polynomial::term(beta, 1.0);
    for (int i = 0; i < r; ++i) {
      const Polynomial fv = lie_map(ocp.cells[i], ocp.n, ocp.m, test);
      for (const auto& [mono, coeff] : fv.terms())
        rel.program.F(row, rel.measures[i].offset + cell_basis->position(mono)) +=
            coeff;
    }
    if (rel.terminal_point) {
      double xb = 1.0;
      for (int k = 0; k < ocp.n; ++k)
        xb *= std::pow((*rel.terminal_point)[k], beta.exponents[k]);
      rel.program.F(row, rel.measures[r].offset) += xb;
    } else {
      rel.program.F(row, rel.measures[r].offset + term_basis->position(beta)) +=
          1.0;
    }
    rel.program.g[row] = y0.values[term_basis->position(beta)];
  }

  // PSD blocks: one moment matrix per measure plus one localizing matrix per
  // guard. Templates are built once per distinct (basis, guard).
  for (int mi = 0; mi < r; ++mi) {
    const auto& lay = rel.measures[mi];
    add_block_from_template(rel.program, build_moment_template(lay.basis, d),
                            lay.offset);
    rel.block_info.push_back({mi, -1});
    int gi = 0;
    for (const Polynomial& g : lay.guards) {
      add_block_from_template(rel.program,
                              build_localizing_template(g, lay.basis, d),
                              lay.offset);
      rel.block_info.push_back({mi, gi++});
    }
  }
  if (rel.terminal_point) {
    // m >= 0 as a 1x1 block.
    LmiBlock b;
    b.side = 1;
    b.constant = Eigen::MatrixXd::Zero(1, 1);
    b.terms = {{rel.measures[r].offset, 0, 0, 1.0}};
    rel.program.blocks.push_back(std::move(b));
    rel.block_info.push_back({r, -1});
  } else {
    const auto& lay = rel.measures[r];
    add_block_from_template(rel.program, build_moment_template(lay.basis, d),
                            lay.offset);
    rel.block_info.push_back({r, -1});
    int gi = 0;
    for (const Polynomial& g : lay.guards) {
      add_block_from_template(rel.program,
                              build_localizing_template(g, lay.basis, d),
                              lay.offset);
      rel.block_info.push_back({r, gi++});
    }
  }

  // Optional mass bound: sum_i y_{i,0} <= bound as a 1x1 block.
  if (ocp.mass_bound) {
    LmiBlock b;
    b.side = 1;
    b.constant = Eigen::MatrixXd::Constant(1, 1, *ocp.mass_bound);
    for (int i = 0; i < r; ++i) b.terms.push_back({rel.measures[i].offset, 0, 0, -1.0});
    rel.mass_block = static_cast<int>(rel.program.blocks.size());
    rel.program.blocks.push_back(std::move(b));
    rel.block_info.push_back({-1, -1});
  }

  return rel;
}

namespace {
// s(x) = b(x)' Z b(x) over the degree <= half monomial vector b.
Polynomial gram_polynomial(const Eigen::MatrixXd& Z, int nvars) {
  const int side = static_cast<int>(Z.rows());
  // Recover the half-order from the side length.
  int half = 0;
  while (monomial_count(nvars, half) < side) ++half;
  const std::vector<Monomial> b = monomials_up_to(nvars, half);
  Polynomial s(nvars);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      if (Z(i, j) == 0.0) continue;
      Monomial m(nvars);
      for (int k = 0; k < nvars; ++k)
        m.exponents[k] = b[i].exponents[k] + b[j].exponents[k];
      s.set_coefficient(m, s.coefficient(m) + Z(i, j));
    }
  return s;
}

double max_abs_coeff(const Polynomial& p) {
  double m = 0.0;
  for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
  return m;
}
}  // namespace

CertificateReport verify_certificate(const PwaOcp& scaled_ocp,
                                     const LmiRelaxation& rel,
                                     const Polynomial& v_scaled,
                                     const ConicSolution& solution,
                                     const PwaOcp& original_ocp,
                                     const Polynomial& v_original,
                                     int grid_per_dim) {
  CertificateReport rep;
  const int r = static_cast<int>(scaled_ocp.cells.size());
  const int nxu = scaled_ocp.n + scaled_ocp.m;

  const double z_mass =
      rel.mass_block >= 0 &&
              rel.mass_block < static_cast<int>(solution.block_duals.size())
          ? solution.block_duals[rel.mass_block](0, 0)
          : 0.0;

  // (a) Putinar identity residual per cell and for the terminal constraint.
  for (int i = 0; i <= r; ++i) {
    const bool terminal = (i == r);
    if (terminal && rel.terminal_point) {
      // Point target: the identity collapses to
      // L_T(x_T) - v(x_T) = z_T >= 0 with z_T the dual of the mass block.
      double zT = 0.0;
      for (std::size_t bi = 0; bi < rel.block_info.size(); ++bi)
        if (rel.block_info[bi].measure == r && bi < solution.block_duals.size())
          zT = solution.block_duals[bi](0, 0);
      const double lhs_val =
          (scaled_ocp.terminal_cost - v_scaled).evaluate(*rel.terminal_point);
      rep.terminal_residual = std::abs(lhs_val - zT);
      continue;
    }
    const int nv = terminal ? scaled_ocp.n : nxu;
    Polynomial lhs(nv);
    if (terminal) {
      lhs = scaled_ocp.terminal_cost - v_scaled;
    } else {
      lhs = scaled_ocp.cells[i].lagrangian -
            lie_map(scaled_ocp.cells[i], scaled_ocp.n, scaled_ocp.m, v_scaled);
    }
    Polynomial rhs(nv);
    for (std::size_t bi = 0; bi < rel.block_info.size(); ++bi) {
      if (rel.block_info[bi].measure != i) continue;
      if (bi >= solution.block_duals.size()) continue;
      Polynomial s = gram_polynomial(solution.block_duals[bi], nv);
      if (rel.block_info[bi].guard >= 0)
        s = s * rel.measures[i].guards[rel.block_info[bi].guard];
      rhs = rhs + s;
    }
    if (!terminal && z_mass != 0.0)
      rhs = rhs - Polynomial::constant(nv, z_mass);
    const double resid = max_abs_coeff(lhs - rhs);
    if (terminal)
      rep.terminal_residual = resid;
    else
      rep.cell_residuals.push_back(resid);
  }

  // (b) Sampled HJB subsolution check on a grid in original coordinates.
  const PwaOcp& ocp = original_ocp;
  const int n = ocp.n, m = ocp.m;
  std::vector<Polynomial> grad(n);
  for (int i = 0; i < n; ++i) grad[i] = v_original.partial_derivative(i);

  const long total_dims = n + m;
  const int g = total_dims <= 2 ? grid_per_dim : std::max(5, grid_per_dim / 8);
  std::vector<int> idx(total_dims, 0);
  Eigen::VectorXd pt(total_dims);
  rep.hjb_min = std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    for (int k = 0; k < n; ++k)
      pt[k] = ocp.state_box.lo[k] +
              (ocp.state_box.hi[k] - ocp.state_box.lo[k]) * idx[k] / (g - 1.0);
    for (int k = 0; k < m; ++k)
      pt[n + k] = ocp.input_box.lo[k] +
                  (ocp.input_box.hi[k] - ocp.input_box.lo[k]) * idx[n + k] /
                      (g - 1.0);
    const Eigen::VectorXd x = pt.head(n), u = pt.tail(m);
    for (const Cell& c : ocp.cells) {
      bool member = true;
      for (const Polynomial& gg : c.guards)
        if (gg.evaluate(pt) < -kGuardTol) {
          member = false;
          break;
        }
      if (!member) continue;
      const Eigen::VectorXd f = c.dynamics(x, u);
      double h = c.lagrangian.evaluate(pt);
      for (int k = 0; k < n; ++k) h += grad[k].evaluate(x) * f[k];
      if (h < rep.hjb_min) {
        rep.hjb_min = h;
        rep.worst_point = pt;
      }
    }
    // advance the multi-index
    int k = 0;
    for (; k < total_dims; ++k) {
      if (++idx[k] < g) break;
      idx[k] = 0;
    }
    done = (k == total_dims);
  }
  return rep;
}

OrderResult solve_order(const PwaOcp& ocp, int d, const RelaxationOptions& opts) {
  OrderResult out;
  out.d = d;
  const UnitBoxScaling scal =
      opts.scale_to_unit_box ? unit_box_scaling(ocp) : identity_scaling(ocp);
  const PwaOcp scaled = apply_scaling(ocp, scal);
  LmiRelaxation rel = assemble(scaled, d);
  out.solution = solve(rel.program, opts.solver);

  Polynomial v_scaled(ocp.n);
  for (std::size_t row = 0; row < rel.row_monomials.size(); ++row)
    v_scaled.set_coefficient(rel.row_monomials[row],
                             out.solution.eq_multipliers[row]);
  out.value.v = unscale_value(v_scaled, scal);
  out.value.order = d;
  out.value.lower_bound = out.solution.primal_objective;
  out.value.solver_gap = out.solution.gap;
  out.lower_bound_scaled = out.solution.primal_objective;

  if (out.solution.status == SolveStatus::Optimal ||
      out.solution.status == SolveStatus::MaxIterations) {
    out.certificate = verify_certificate(scaled, rel, v_scaled, out.solution,
                                         ocp, out.value.v, opts.hjb_grid);
  }
  return out;
}

std::vector<OrderResult> hierarchy(const PwaOcp& ocp, int d_max,
                                   const RelaxationOptions& opts) {
  const int d_min = minimum_order(ocp);
  if (d_max < d_min)
    throw std::invalid_argument("hierarchy: d_max below minimum order");
  std::vector<OrderResult> out;
  for (int d = d_min; d <= d_max; ++d) {
    try {
      out.push_back(solve_order(ocp, d, opts));
    } catch (const std::exception& e) {
      OrderResult fail;
      fail.d = d;
      fail.solution.status = SolveStatus::NumericalFailure;
      out.push_back(std::move(fail));
    }
  }
  return out;
}

std::string value_function_to_json(const ValueFunctionApprox& v, int n) {
  ordered_json j;
  j["n"] = n;
  j["order"] = v.order;
  j["lower_bound"] = v.lower_bound;
  j["solver_gap"] = v.solver_gap;
  json monos = json::array(), coeffs = json::array();
  for (const auto& [mono, c] : v.v.terms()) {
    monos.push_back(mono.exponents);
    coeffs.push_back(c);
  }
  j["monomials"] = monos;
  j["coefficients"] = coeffs;
  return j.dump(2);
}

ValueFunctionApprox value_function_from_json(const std::string& text) {
  const json j = json::parse(text);
  const int n = j.at("n").get<int>();
  ValueFunctionApprox v;
  v.order = j.at("order").get<int>();
  v.lower_bound = j.at("lower_bound").get<double>();
  v.solver_gap = j.value("solver_gap", 0.0);
  v.v = Polynomial(n);
  const auto& monos = j.at("monomials");
  const auto& coeffs = j.at("coefficients");
  if (monos.size() != coeffs.size())
    throw std::invalid_argument("value function file: length mismatch");
  for (std::size_t i = 0; i < monos.size(); ++i) {
    Monomial m(monos[i].get<std::vector<int>>());
    if (m.nvars() != n)
      throw std::invalid_argument("value function file: monomial size mismatch");
    v.v.set_coefficient(m, coeffs[i].get<double>());
  }
  return v;
}

}  // namespace pwamc
