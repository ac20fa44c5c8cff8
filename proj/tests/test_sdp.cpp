#include <doctest.h>

#include <sstream>

#include <pwamc/sdp.hpp>

using namespace pwamc;

namespace {

// minimize y s.t. [[1, y], [y, 1]] >= 0  =>  y* = -1.
ConicProgram edge_program() {
  ConicProgram p;
  p.nvar = 1;
  p.c = Eigen::VectorXd::Ones(1);
  p.F = Eigen::MatrixXd(0, 1);
  p.g = Eigen::VectorXd(0);
  LmiBlock b;
  b.side = 2;
  b.constant = Eigen::MatrixXd::Identity(2, 2);
  b.terms = {{0, 0, 1, 1.0}};
  p.blocks.push_back(b);
  return p;
}

// minimize y1 + y2 s.t. y1 = 1, diag(y1, y2) >= 0  =>  (1, 0), objective 1.
ConicProgram corner_program() {
  ConicProgram p;
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
  return p;
}

// minimize y s.t. y >= 2 via the scalar lower-bound channel.
ConicProgram bound_program() {
  ConicProgram p;
  p.nvar = 1;
  p.c = Eigen::VectorXd::Ones(1);
  p.F = Eigen::MatrixXd(0, 1);
  p.g = Eigen::VectorXd(0);
  p.lower_bounds = {{0, 2.0}};
  return p;
}

ConicSolution tight_solve(const ConicProgram& p) {
  SolveOptions opts;
  opts.tol = 1e-9;  // the analytic suite is pinned at gap <= 1e-8 absolute
  return solve(p, opts);
}

}  // namespace

TEST_CASE("edge program: minimize y with [[1,y],[y,1]] PSD") {
  ConicSolution s = tight_solve(edge_program());
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.y[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(s.gap <= 1e-8);
}

TEST_CASE("unconstrained zero objective is trivially optimal") {
  ConicProgram p;
  p.nvar = 1;
  p.c = Eigen::VectorXd::Zero(1);
  p.F = Eigen::MatrixXd(0, 1);
  p.g = Eigen::VectorXd(0);
  ConicSolution s = solve(p);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.primal_objective == doctest::Approx(0.0));
}

TEST_CASE("corner program: equality pins y1, PSD forces y2 >= 0") {
  ConicSolution s = tight_solve(corner_program());
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.y[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.gap <= 1e-8);
}

TEST_CASE("scalar lower bounds act as 1x1 blocks") {
  ConicSolution s = solve(bound_program());
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.y[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("recomputed KKT residuals agree with the reported solution") {
  for (const ConicProgram& p : {edge_program(), corner_program()}) {
    ConicSolution s = tight_solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    ResidualReport rep = residuals(p, s);
    CHECK(rep.eq_infeasibility <= 1e-8);
    CHECK(rep.dual_infeasibility <= 1e-8);
    for (double e : rep.block_min_eig) CHECK(e >= -1e-8);
    for (double c : rep.block_complementarity) CHECK(std::abs(c) <= 1e-6);
    // The independent recomputation of the gap matches the reported one.
    CHECK(std::abs(rep.duality_gap - s.gap) <= 1e-10);
  }
}

TEST_CASE("perturbing the solution shows up in the residuals") {
  ConicProgram p = corner_program();
  ConicSolution s = solve(p);
  s.y[0] += 0.1;
  ResidualReport rep = residuals(p, s);
  CHECK(rep.eq_infeasibility == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("weak duality at the reported solution") {
  for (const ConicProgram& p : {edge_program(), corner_program()}) {
    ConicSolution s = tight_solve(p);
    CHECK(s.primal_objective >= s.dual_objective - 1e-7);
  }
}

TEST_CASE("preprocess removes duplicate rows and flags inconsistency") {
  ConicProgram p = corner_program();
  // Duplicate the single equality row.
  p.F.conservativeResize(2, 2);
  p.F.row(1) = p.F.row(0);
  p.g.conservativeResize(2);
  p.g[1] = p.g[0];
  PreprocessReport rep = preprocess(p);
  CHECK(!rep.infeasible);
  CHECK(rep.removed_rows.size() == 1);
  CHECK(p.F.rows() == 1);

  // Row 0*y = 1 is infeasible.
  ConicProgram q = corner_program();
  q.F.conservativeResize(2, 2);
  q.F.row(1).setZero();
  q.g.conservativeResize(2);
  q.g[1] = 1.0;
  PreprocessReport rep2 = preprocess(q);
  CHECK(rep2.infeasible);

  // A clean program passes through unchanged.
  ConicProgram r = corner_program();
  PreprocessReport rep3 = preprocess(r);
  CHECK(!rep3.infeasible);
  CHECK(rep3.removed_rows.empty());
  CHECK(r.F.rows() == 1);
}

TEST_CASE("objective is invariant under row and block permutation") {
  ConicProgram p;
  p.nvar = 2;
  p.c = Eigen::VectorXd(2);
  p.c << 1.0, 0.5;
  p.F = Eigen::MatrixXd(2, 2);
  p.F << 1, 1, 1, -1;
  p.g = Eigen::VectorXd(2);
  p.g << 1.0, 0.2;
  LmiBlock b1;
  b1.side = 2;
  b1.constant = Eigen::MatrixXd::Identity(2, 2);
  b1.terms = {{0, 0, 1, 1.0}};
  LmiBlock b2;
  b2.side = 1;
  b2.constant = Eigen::MatrixXd::Constant(1, 1, 2.0);
  b2.terms = {{1, 0, 0, 1.0}};
  p.blocks = {b1, b2};
  ConicSolution s1 = solve(p);
  REQUIRE(s1.status == SolveStatus::Optimal);

  ConicProgram q = p;
  q.F.row(0).swap(q.F.row(1));
  std::swap(q.g[0], q.g[1]);
  std::swap(q.blocks[0], q.blocks[1]);
  ConicSolution s2 = solve(q);
  REQUIRE(s2.status == SolveStatus::Optimal);
  CHECK(std::abs(s1.primal_objective - s2.primal_objective) <= 1e-7);
}

TEST_CASE("SDPA export carries the right dimensions") {
  std::ostringstream ss;
  write_sdpa(corner_program(), ss);
  std::istringstream in(ss.str());
  int mdim = 0, nblock = 0;
  in >> mdim >> nblock;
  CHECK(mdim == 2);     // two scalar variables
  CHECK(nblock == 2);   // the LMI block plus the paired-equality block
  int side1 = 0, side2 = 0;
  in >> side1 >> side2;
  CHECK(side1 == 2);
  CHECK(side2 == -2);   // one equality encoded as a +/- diagonal pair
}
