#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pwamc/moments.hpp"
#include "pwamc/polynomial.hpp"
#include "pwamc/problem.hpp"
#include "pwamc/sdp.hpp"

namespace pwamc {

/// Affine change of coordinates mapping state_box x input_box onto the unit
/// box: x = Sx * xhat + cx (componentwise), likewise for u. Keeps the moment
/// sequences well scaled at high orders.
struct UnitBoxScaling {
  Eigen::VectorXd Sx, cx, Su, cu;
  bool identity = false;
};

UnitBoxScaling unit_box_scaling(const PwaOcp& ocp);
UnitBoxScaling identity_scaling(const PwaOcp& ocp);

/// The problem expressed in the scaled coordinates.
PwaOcp apply_scaling(const PwaOcp& ocp, const UnitBoxScaling& s);

/// Map a value function found in scaled coordinates back to the original
/// ones: v(x) = vhat(Sx^{-1} (x - cx)).
Polynomial unscale_value(const Polynomial& v_scaled, const UnitBoxScaling& s);

/// Order-d LMI relaxation of the occupation-measure LP, plus the
/// bookkeeping needed to read the solution back.
struct LmiRelaxation {
  int d = 0;
  ConicProgram program;
  std::vector<Monomial> row_monomials;  // test monomial x^beta per equality row

  struct MeasureLayout {
    int offset = 0;  // first program variable of this measure's moments
    std::shared_ptr<const MomentBasis> basis;
    std::vector<Polynomial> guards;  // localizing guards, block order
  };
  std::vector<MeasureLayout> measures;  // r cell measures, then terminal

  struct BlockInfo {
    int measure;  // index into measures
    int guard;    // -1 for the moment block, else index into guards
  };
  std::vector<BlockInfo> block_info;  // aligned with program.blocks
  int mass_block = -1;                // block index of the mass bound, or -1

  // Set when the terminal guards pin a single point x_T. The terminal
  // measure is then eliminated to a single mass variable m with moments
  // m * x_T^beta; keeping the full moment matrix of a forced point mass
  // would leave the LMI without a strictly feasible point and stall the
  // interior-point solver.
  std::optional<Eigen::VectorXd> terminal_point;
};

/// The unique point satisfying the terminal guards, when they pin one:
/// opposing degree-1 guard pairs are read as affine equalities, and a point
/// is returned when those have a unique solution meeting every guard.
std::optional<Eigen::VectorXd> point_target(const PwaOcp& ocp);

struct ValueFunctionApprox {
  Polynomial v{1};
  int order = 0;
  double lower_bound = 0.0;
  double solver_gap = 0.0;
};

struct CertificateReport {
  std::vector<double> cell_residuals;  // Putinar identity, per cell
  double terminal_residual = 0.0;
  double hjb_min = 0.0;                 // sampled grad(v).f + L minimum
  Eigen::VectorXd worst_point;          // (x, u) attaining hjb_min
};

/// Smallest order d whose moments cover every datum of the problem.
int minimum_order(const PwaOcp& ocp);

/// Build the order-d relaxation of (the already scaled) problem. Box guards
/// are appended to every measure; the mass bound becomes a 1x1 block.
LmiRelaxation assemble(const PwaOcp& ocp, int d);

struct RelaxationOptions {
  SolveOptions solver;
  bool scale_to_unit_box = true;
  int hjb_grid = 201;  // per-dimension certificate sampling resolution
};

struct OrderResult {
  int d = 0;
  ValueFunctionApprox value;
  CertificateReport certificate;
  ConicSolution solution;
  double lower_bound_scaled = 0.0;  // before undoing the coordinate change
};

/// Assemble, solve, and post-process one order of the hierarchy. All
/// reported quantities are in original coordinates.
OrderResult solve_order(const PwaOcp& ocp, int d, const RelaxationOptions& opts = {});

/// Orders minimum_order(ocp)..d_max in sequence; solver failures are
/// recorded in the per-order status and later orders are still attempted.
std::vector<OrderResult> hierarchy(const PwaOcp& ocp, int d_max,
                                   const RelaxationOptions& opts = {});

/// Reconstruct the SOS multipliers from the Gram block duals and measure the
/// coefficientwise residual of the Putinar identity, plus a sampled
/// HJB-subsolution check in original coordinates.
CertificateReport verify_certificate(const PwaOcp& scaled_ocp,
                                     const LmiRelaxation& rel,
                                     const Polynomial& v_scaled,
                                     const ConicSolution& solution,
                                     const PwaOcp& original_ocp,
                                     const Polynomial& v_original,
                                     int grid_per_dim = 201);

/// Standalone value-function coefficient file (JSON), consumable by the
/// policy tooling.
std::string value_function_to_json(const ValueFunctionApprox& v, int n);
ValueFunctionApprox value_function_from_json(const std::string& text);

}  // namespace pwamc
