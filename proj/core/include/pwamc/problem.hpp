#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "pwamc/polynomial.hpp"

namespace pwamc {

/// One region of the piecewise-affine partition. Dynamics inside the cell
/// are xdot = A x + a + B u; membership is { p(x,u) >= 0 for all guards }.
struct Cell {
  int index = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd a;
  Eigen::MatrixXd B;
  Polynomial lagrangian{0};            // in (x, u)
  std::vector<Polynomial> guards;      // in (x, u)

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u) const {
    return A * x + a + B * u;
  }
};

struct InitialMeasure {
  enum class Kind { Dirac, UniformBox };
  Kind kind = Kind::Dirac;
  Eigen::VectorXd point;      // Dirac
  Eigen::VectorXd lo, hi;     // UniformBox
};

struct Box {
  Eigen::VectorXd lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const {
    return (v.array() >= lo.array() - tol).all() &&
           (v.array() <= hi.array() + tol).all();
  }
};

/// A free-time piecewise-affine optimal control problem on a compact
/// state/input box, with polynomial running and terminal costs.
struct PwaOcp {
  int n = 0;  // state dimension
  int m = 0;  // input dimension
  std::vector<Cell> cells;
  Polynomial terminal_cost{0};              // in x
  std::vector<Polynomial> terminal_guards;  // in x
  InitialMeasure initial;
  Box state_box;
  Box input_box;
  std::optional<double> mass_bound;
};

/// Parse and fully validate a UTF-8 JSON problem file. Throws
/// std::invalid_argument naming the offending field on any violation.
PwaOcp parse_problem(const std::string& text);

/// Inverse of parse_problem up to floating-point text round-trip.
std::string render_problem(const PwaOcp& ocp);

/// The two-cell first-order example: xdot = -x+1+u on {x >= 0},
/// xdot = x+1+u on {x <= 0}, cost integral of 2(x-1)^2 + u^2, start at
/// x = -1, target x = 1.
PwaOcp builtin_example();

/// Lie-derivative map F_i(v) = -grad(v) . (A x + a + B u), a polynomial in
/// (x, u). v must be a polynomial in the n state variables only.
Polynomial lie_map(const Cell& cell, int n, int m, const Polynomial& v);

inline constexpr double kGuardTol = 1e-9;

/// Index of the cell containing x. On shared boundaries prefers the cell
/// the flow is entering (largest inward derivative of the active guard),
/// then the lowest index. Throws if no cell contains x.
int classify_cell(const PwaOcp& ocp, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u_hint, double tol = kGuardTol);

/// Sampled well-posedness diagnostic: draws boundary points shared by two
/// cells and reports the largest vector-field mismatch found. Returns 0 when
/// no shared boundary points are hit.
double boundary_consistency_check(const PwaOcp& ocp, int samples = 1000,
                                  unsigned seed = 0);

}  // namespace pwamc
