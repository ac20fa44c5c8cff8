#include "pwamc/problem.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pwamc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument("problem file, field \"" + where + "\": " + what);
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where, int len) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  if (len >= 0 && static_cast<int>(j.size()) != len) {
    std::ostringstream os;
    os << "expected length " << len << ", got " << j.size();
    fail(where, os.str());
  }
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where, "expected a number");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) fail(where, "non-finite entry");
  }
  return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where, int rows,
                             int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    fail(where, "expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    M.row(r) = parse_vector(j[r], where, cols).transpose();
  return M;
}

Polynomial parse_poly(const json& j, const std::string& where, int n, int m) {
  if (!j.is_string()) fail(where, "expected a polynomial string");
  try {
    return Polynomial::parse(j.get<std::string>(), n, m);
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

Box parse_box(const json& j, const std::string& where, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    fail(where, "expected one [lo, hi] pair per coordinate");
  Box b;
  b.lo.resize(dim);
  b.hi.resize(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_array() || j[i].size() != 2) fail(where, "expected [lo, hi]");
    b.lo[i] = j[i][0].get<double>();
    b.hi[i] = j[i][1].get<double>();
    if (!std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i]) || b.lo[i] >= b.hi[i])
      fail(where, "box interval must be finite and nonempty");
  }
  return b;
}

const json& require(const json& j, const std::string& key) {
  if (!j.contains(key)) fail(key, "missing");
  return j.at(key);
}

}  // namespace

PwaOcp parse_problem(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("problem file: ") + e.what());
  }

  static const std::vector<std::string> known = {
      "n", "m", "cells", "terminal_cost", "terminal_guards",
      "initial", "state_box", "input_box", "mass_bound"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      fail(it.key(), "unknown field");
  }

  PwaOcp ocp;
  ocp.n = require(j, "n").get<int>();
  ocp.m = require(j, "m").get<int>();
  if (ocp.n < 1) fail("n", "state dimension must be >= 1");
  if (ocp.m < 0) fail("m", "input dimension must be >= 0");

  const json& jc = require(j, "cells");
  if (!jc.is_array() || jc.empty()) fail("cells", "at least one cell required");
  int ci = 0;
  for (const auto& c : jc) {
    const std::string where = "cells[" + std::to_string(ci) + "]";
    Cell cell;
    cell.index = ci;
    cell.A = parse_matrix(require(c, "A"), where + ".A", ocp.n, ocp.n);
    cell.a = parse_vector(require(c, "a"), where + ".a", ocp.n);
    cell.B = parse_matrix(require(c, "B"), where + ".B", ocp.n, ocp.m);
    cell.lagrangian =
        parse_poly(require(c, "lagrangian"), where + ".lagrangian", ocp.n, ocp.m);
    for (const auto& g : c.at("guards"))
      cell.guards.push_back(parse_poly(g, where + ".guards", ocp.n, ocp.m));
    if (cell.guards.empty()) fail(where + ".guards", "at least one guard required");
    ocp.cells.push_back(std::move(cell));
    ++ci;
  }

  ocp.terminal_cost =
      parse_poly(require(j, "terminal_cost"), "terminal_cost", ocp.n, 0);
  for (const auto& g : require(j, "terminal_guards"))
    ocp.terminal_guards.push_back(parse_poly(g, "terminal_guards", ocp.n, 0));

  const json& ji = require(j, "initial");
  if (ji.contains("dirac")) {
    ocp.initial.kind = InitialMeasure::Kind::Dirac;
    ocp.initial.point = parse_vector(ji.at("dirac"), "initial.dirac", ocp.n);
  } else if (ji.contains("uniform")) {
    ocp.initial.kind = InitialMeasure::Kind::UniformBox;
    ocp.initial.lo = parse_vector(ji.at("uniform").at("lo"), "initial.uniform.lo", ocp.n);
    ocp.initial.hi = parse_vector(ji.at("uniform").at("hi"), "initial.uniform.hi", ocp.n);
    if (!((ocp.initial.lo.array() < ocp.initial.hi.array()).all()))
      fail("initial.uniform", "lo must be < hi componentwise");
  } else {
    fail("initial", "expected \"dirac\" or \"uniform\"");
  }

  ocp.state_box = parse_box(require(j, "state_box"), "state_box", ocp.n);
  ocp.input_box = parse_box(require(j, "input_box"), "input_box", ocp.m);

  if (j.contains("mass_bound")) {
    ocp.mass_bound = j.at("mass_bound").get<double>();
    if (!(*ocp.mass_bound > 0.0)) fail("mass_bound", "must be strictly positive");
  }

  if (ocp.initial.kind == InitialMeasure::Kind::Dirac &&
      !ocp.state_box.contains(ocp.initial.point))
    fail("initial.dirac", "point lies outside state_box");

  return ocp;
}

namespace {
json box_to_json(const Box& b) {
  json arr = json::array();
  for (int i = 0; i < b.dim(); ++i) arr.push_back({b.lo[i], b.hi[i]});
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}
}  // namespace

std::string render_problem(const PwaOcp& ocp) {
  ordered_json j;
  j["n"] = ocp.n;
  j["m"] = ocp.m;
  j["cells"] = json::array();
  for (const Cell& c : ocp.cells) {
    ordered_json jc;
    jc["A"] = matrix_to_json(c.A);
    jc["a"] = vector_to_json(c.a);
    jc["B"] = matrix_to_json(c.B);
    jc["lagrangian"] = c.lagrangian.to_string(ocp.n);
    json guards = json::array();
    for (const Polynomial& g : c.guards) guards.push_back(g.to_string(ocp.n));
    jc["guards"] = guards;
    j["cells"].push_back(jc);
  }
  j["terminal_cost"] = ocp.terminal_cost.to_string(ocp.n);
  json tg = json::array();
  for (const Polynomial& g : ocp.terminal_guards) tg.push_back(g.to_string(ocp.n));
  j["terminal_guards"] = tg;
  if (ocp.initial.kind == InitialMeasure::Kind::Dirac) {
    j["initial"] = {{"dirac", vector_to_json(ocp.initial.point)}};
  } else {
    j["initial"] = {{"uniform", {{"lo", vector_to_json(ocp.initial.lo)},
                                 {"hi", vector_to_json(ocp.initial.hi)}}}};
  }
  j["state_box"] = box_to_json(ocp.state_box);
  j["input_box"] = box_to_json(ocp.input_box);
  if (ocp.mass_bound) j["mass_bound"] = *ocp.mass_bound;
  return j.dump(2);
}

PwaOcp builtin_example() {
  PwaOcp ocp;
  ocp.n = 1;
  ocp.m = 1;

  const Polynomial x = Polynomial::variable(2, 0);
  const Polynomial u = Polynomial::variable(2, 1);
  const Polynomial one = Polynomial::constant(2, 1.0);
  const Polynomial lagrangian = 2.0 * (x - one) * (x - one) + u * u;

  Cell c1;
  c1.index = 0;
  c1.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
  c1.a = Eigen::VectorXd::Constant(1, 1.0);
  c1.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c1.lagrangian = lagrangian;
  c1.guards = {x};  // x >= 0

  Cell c2;
  c2.index = 1;
  c2.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c2.a = Eigen::VectorXd::Constant(1, 1.0);
  c2.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c2.lagrangian = lagrangian;
  c2.guards = {-x};  // -x >= 0

  ocp.cells = {c1, c2};
  ocp.terminal_cost = Polynomial(1);

  // Terminal point x_T = 1 as the pair of opposing inequalities.
  const Polynomial xs = Polynomial::variable(1, 0);
  const Polynomial ones = Polynomial::constant(1, 1.0);
  ocp.terminal_guards = {xs - ones, ones - xs};

  ocp.initial.kind = InitialMeasure::Kind::Dirac;
  ocp.initial.point = Eigen::VectorXd::Constant(1, -1.0);

  ocp.state_box.lo = Eigen::VectorXd::Constant(1, -2.0);
  ocp.state_box.hi = Eigen::VectorXd::Constant(1, 2.0);
  ocp.input_box.lo = Eigen::VectorXd::Constant(1, -4.0);
  ocp.input_box.hi = Eigen::VectorXd::Constant(1, 4.0);
  ocp.mass_bound = 20.0;
  return ocp;
}

Polynomial lie_map(const Cell& cell, int n, int m, const Polynomial& v) {
  if (v.nvars() != n)
    throw std::invalid_argument("lie_map: v must use exactly the state variables");
  const int nv = n + m;
  // Lift v into (x, u) space: state variables come first.
  Polynomial result(nv);
  for (int i = 0; i < n; ++i) {
    const Polynomial dv = v.partial_derivative(i);
    if (dv.is_zero()) continue;
    Polynomial dv_lift(nv);
    for (const auto& [mono, coeff] : dv.terms()) {
      Monomial lifted(nv);
      for (int k = 0; k < n; ++k) lifted.exponents[k] = mono.exponents[k];
      dv_lift.set_coefficient(lifted, coeff);
    }
    Polynomial fi = Polynomial::constant(nv, cell.a[i]);
    for (int j = 0; j < n; ++j)
      if (cell.A(i, j) != 0.0)
        fi = fi + Polynomial::variable(nv, j, cell.A(i, j));
    for (int j = 0; j < m; ++j)
      if (cell.B(i, j) != 0.0)
        fi = fi + Polynomial::variable(nv, n + j, cell.B(i, j));
    result = result + dv_lift * fi;
  }
  return -result;
}

int classify_cell(const PwaOcp& ocp, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u_hint, double tol) {
  Eigen::VectorXd xu(ocp.n + ocp.m);
  xu << x, u_hint;

  std::vector<int> candidates;
  for (const Cell& c : ocp.cells) {
    bool ok = true;
    for (const Polynomial& g : c.guards)
      if (g.evaluate(xu) < -tol) {
        ok = false;
        break;
      }
    if (ok) candidates.push_back(c.index);
  }
  if (candidates.empty())
    throw std::runtime_error("classify_cell: no cell contains the state");
  if (candidates.size() == 1) return candidates[0];

  // Shared boundary: prefer the cell the flow is entering. Score each
  // candidate by the smallest time derivative of its active guards along its
  // own vector field; the largest score wins, ties go to the lowest index.
  int best = candidates[0];
  double best_score = -std::numeric_limits<double>::infinity();
  for (int idx : candidates) {
    const Cell& c = ocp.cells[idx];
    const Eigen::VectorXd f = c.dynamics(x, u_hint);
    double score = std::numeric_limits<double>::infinity();
    for (const Polynomial& g : c.guards) {
      if (std::abs(g.evaluate(xu)) > tol) continue;  // not active here
      double deriv = 0.0;
      for (int i = 0; i < ocp.n; ++i)
        deriv += g.partial_derivative(i).evaluate(xu) * f[i];
      score = std::min(score, deriv);
    }
    if (score > best_score + tol) {
      best_score = score;
      best = idx;
    }
  }
  return best;
}

double boundary_consistency_check(const PwaOcp& ocp, int samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x(ocp.n), u(ocp.m);
    for (int i = 0; i < ocp.n; ++i)
      x[i] = ocp.state_box.lo[i] +
             unit(rng) * (ocp.state_box.hi[i] - ocp.state_box.lo[i]);
    for (int i = 0; i < ocp.m; ++i)
      u[i] = ocp.input_box.lo[i] +
             unit(rng) * (ocp.input_box.hi[i] - ocp.input_box.lo[i]);
    // Walk x onto a guard zero set by bisecting a random segment through the
    // box on which some guard changes sign, then compare the vector fields of
    // every cell containing the boundary point.
    Eigen::VectorXd x2(ocp.n);
    for (int i = 0; i < ocp.n; ++i)
      x2[i] = ocp.state_box.lo[i] +
              unit(rng) * (ocp.state_box.hi[i] - ocp.state_box.lo[i]);

    for (const Cell& c : ocp.cells) {
      for (const Polynomial& g : c.guards) {
        Eigen::VectorXd lo = x, hi = x2;
        auto eval = [&](const Eigen::VectorXd& xx) {
          Eigen::VectorXd xu(ocp.n + ocp.m);
          xu << xx, u;
          return g.evaluate(xu);
        };
        if (eval(lo) * eval(hi) >= 0.0) continue;
        for (int it = 0; it < 80; ++it) {
          Eigen::VectorXd mid = 0.5 * (lo + hi);
          (eval(lo) * eval(mid) <= 0.0 ? hi : lo) = mid;
        }
        const Eigen::VectorXd xb = 0.5 * (lo + hi);
        Eigen::VectorXd xu(ocp.n + ocp.m);
        xu << xb, u;
        std::vector<int> members;
        for (const Cell& cc : ocp.cells) {
          bool ok = true;
          for (const Polynomial& gg : cc.guards)
            if (gg.evaluate(xu) < -1e-7) {
              ok = false;
              break;
            }
          if (ok) members.push_back(cc.index);
        }
        for (std::size_t i = 0; i + 1 < members.size(); ++i)
          for (std::size_t k = i + 1; k < members.size(); ++k) {
            const Eigen::VectorXd fi = ocp.cells[members[i]].dynamics(xb, u);
            const Eigen::VectorXd fk = ocp.cells[members[k]].dynamics(xb, u);
            worst = std::max(worst, (fi - fk).lpNorm<Eigen::Infinity>());
          }
      }
    }
  }
  return worst;
}

}  // namespace pwamc
