#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace pwamc {

/// One LMI block: constant + sum_a y_a * A_a must be PSD. Per-variable
/// coefficient matrices are stored as upper-triangle triplets.
struct LmiBlock {
  struct Term {
    int var;
    int row, col;  // row <= col
    double value;
  };
  int side = 0;
  Eigen::MatrixXd constant;  // side x side symmetric, may be zero
  std::vector<Term> terms;

  Eigen::MatrixXd instantiate(const Eigen::VectorXd& y) const;
};

/// Linear conic program over free scalar variables y:
///   minimize c'y  s.t.  F y = g,  constant_j + sum_a y_a A_{j,a} PSD,
///   y_k >= lower bound for designated k.
struct ConicProgram {
  int nvar = 0;
  Eigen::VectorXd c;
  Eigen::MatrixXd F;  // rows = equality constraints
  Eigen::VectorXd g;
  std::vector<LmiBlock> blocks;
  std::vector<std::pair<int, double>> lower_bounds;
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalFailure,
};

const char* to_string(SolveStatus s);

struct IterateInfo {
  double primal_objective, dual_objective;
  double primal_infeasibility, dual_infeasibility, gap;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd y;
  Eigen::VectorXd eq_multipliers;           // aligned with equality rows
  std::vector<Eigen::MatrixXd> block_duals; // PSD Gram matrices Z_j
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::vector<IterateInfo> trace;  // per-iteration history
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;  // fraction-to-boundary
  bool equilibrate = true;      // Ruiz row scaling of the equalities
  // Degenerate instances (rank-deficient optimal faces) put a numerical
  // floor under the attainable residuals. When progress stalls, the best
  // iterate is still reported Optimal if all its residuals are below this.
  double accept_tol = 1e-4;
};

/// Infeasible-start primal-dual path following with Nesterov-Todd scaling
/// and a Mehrotra predictor-corrector. Deterministic for identical input.
ConicSolution solve(const ConicProgram& p, const SolveOptions& opts = {});

struct PreprocessReport {
  std::vector<int> removed_rows;
  bool infeasible = false;
  std::string message;
};

/// Drops identically-zero and linearly dependent equality rows (rank
/// revealing QR). Flags 0 = nonzero rows and inconsistent dependencies.
PreprocessReport preprocess(ConicProgram& p);

struct ResidualReport {
  double eq_infeasibility = 0.0;          // ||F y - g||_inf
  std::vector<double> block_min_eig;      // of instantiated primal blocks
  std::vector<double> block_complementarity;  // <X_j, Z_j>
  double dual_infeasibility = 0.0;        // ||c - F'lam - A*(Z)||_inf
  double duality_gap = 0.0;
};

/// Recomputes all KKT residuals from scratch, independent of the solve path.
ResidualReport residuals(const ConicProgram& p, const ConicSolution& s);

/// Emit the program in SDPA sparse format (.dat-s). Equalities are encoded
/// as paired diagonal inequality blocks, per common practice.
void write_sdpa(const ConicProgram& p, std::ostream& os);

}  // namespace pwamc
