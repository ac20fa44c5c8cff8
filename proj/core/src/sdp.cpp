#include "pwamc/sdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>
#include <ostream>
#include <stdexcept>

namespace pwamc {

namespace {

// The interior-point iteration runs in extended precision: the Schur
// complement's conditioning degrades like 1/mu^2 when the optimal moment
// matrices are rank-deficient (the generic case here), and double puts a
// ~1e-5 floor under the attainable dual residual.
using Real = long double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

constexpr Real kInf = std::numeric_limits<Real>::infinity();

// A_j(dy): sum of per-variable coefficient matrices, dense symmetric.
template <class MatT, class VecT>
MatT apply_terms(const LmiBlock& b, const VecT& dy) {
  MatT M = MatT::Zero(b.side, b.side);
  for (const LmiBlock::Term& t : b.terms) {
    M(t.row, t.col) += t.value * dy[t.var];
    if (t.row != t.col) M(t.col, t.row) += t.value * dy[t.var];
  }
  return M;
}

// A*(Z) accumulated into out: out_a += <A_{j,a}, Z>.
template <class MatT, class VecT>
void accumulate_adjoint(const LmiBlock& b, const MatT& Z, VecT& out) {
  for (const LmiBlock::Term& t : b.terms) {
    const double w = (t.row == t.col) ? 1.0 : 2.0;
    out[t.var] += w * t.value * Z(t.row, t.col);
  }
}

// Largest step alpha so that S + alpha * dS stays PSD (up to the fraction
// kept by the caller). Returns +inf when dS is PSD-compatible for all alpha.
Real max_step(const Mat& S, const Mat& dS) {
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  const Mat L = llt.matrixL();
  const Mat tmp = L.template triangularView<Eigen::Lower>().solve(dS).transpose();
  const Mat Msc = L.template triangularView<Eigen::Lower>().solve(tmp);
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (Msc + Msc.transpose())),
                                        Eigen::EigenvaluesOnly);
  const Real lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

struct BlockVars {
  std::vector<int> vars;  // unique, sorted
  // terms grouped by variable, aligned with vars
  std::vector<std::vector<LmiBlock::Term>> terms;
};

BlockVars group_by_var(const LmiBlock& b) {
  BlockVars bv;
  for (const LmiBlock::Term& t : b.terms) bv.vars.push_back(t.var);
  std::sort(bv.vars.begin(), bv.vars.end());
  bv.vars.erase(std::unique(bv.vars.begin(), bv.vars.end()), bv.vars.end());
  bv.terms.resize(bv.vars.size());
  for (const LmiBlock::Term& t : b.terms) {
    const auto it = std::lower_bound(bv.vars.begin(), bv.vars.end(), t.var);
    bv.terms[it - bv.vars.begin()].push_back(t);
  }
  return bv;
}

Real sparse_dot(const std::vector<LmiBlock::Term>& terms, const Mat& M) {
  Real v = 0.0;
  for (const LmiBlock::Term& t : terms)
    v += (t.row == t.col ? 1.0 : 2.0) * t.value * M(t.row, t.col);
  return v;
}

Mat sparse_matrix(const std::vector<LmiBlock::Term>& terms, int side) {
  Mat A = Mat::Zero(side, side);
  for (const LmiBlock::Term& t : terms) {
    A(t.row, t.col) += t.value;
    if (t.row != t.col) A(t.col, t.row) += t.value;
  }
  return A;
}

// Quad-precision helpers for the few products whose rounding error is
// amplified by ||W^{-1}||^2; everything else stays in long double.
using Quad = __float128;

struct QMat {
  int rows = 0, cols = 0;
  std::vector<Quad> a;
  QMat() = default;
  QMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}
  Quad& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  Quad operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
};

QMat to_quad(const Mat& M) {
  QMat q(static_cast<int>(M.rows()), static_cast<int>(M.cols()));
  for (int i = 0; i < q.rows; ++i)
    for (int j = 0; j < q.cols; ++j) q(i, j) = static_cast<Quad>(M(i, j));
  return q;
}

Mat from_quad(const QMat& q) {
  Mat M(q.rows, q.cols);
  for (int i = 0; i < q.rows; ++i)
    for (int j = 0; j < q.cols; ++j) M(i, j) = static_cast<Real>(q(i, j));
  return M;
}

QMat qmul(const QMat& A, const QMat& B) {
  QMat C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      const Quad aik = A(i, k);
      if (aik == 0) continue;
      for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  return C;
}

QMat qmul_tn(const QMat& A, const QMat& B) {  // A' * B
  QMat C(A.cols, B.cols);
  for (int k = 0; k < A.rows; ++k)
    for (int i = 0; i < A.cols; ++i) {
      const Quad aki = A(k, i);
      if (aki == 0) continue;
      for (int j = 0; j < B.cols; ++j) C(i, j) += aki * B(k, j);
    }
  return C;
}

QMat qsub(const QMat& A, const QMat& B) {
  QMat C(A.rows, A.cols);
  for (std::size_t i = 0; i < C.a.size(); ++i) C.a[i] = A.a[i] - B.a[i];
  return C;
}

void q_accumulate_adjoint(const LmiBlock& b, const QMat& Z,
                          std::vector<Quad>& out) {
  for (const LmiBlock::Term& t : b.terms) {
    const Quad w = (t.row == t.col) ? 1.0 : 2.0;
    out[t.var] += w * static_cast<Quad>(t.value) * Z(t.row, t.col);
  }
}

struct NtScaling {
  Mat R, Rinv, Ginv;  // Ginv = W^{-1}
  Vec sigma;          // NT spectrum; <X,Z> = sum sigma^2
  bool ok = false;
};

NtScaling nt_scaling(const Mat& X, const Mat& Z) {
  NtScaling s;
  const int n = static_cast<int>(X.rows());
  Eigen::LLT<Mat> lltX(X), lltZ(Z);
  if (lltX.info() != Eigen::Success || lltZ.info() != Eigen::Success) return s;
  const Mat Lx = lltX.matrixL();
  const Mat Lz = lltZ.matrixL();
  Eigen::JacobiSVD<Mat> svd(Mat(Lz.transpose() * Lx),
                            Eigen::ComputeFullU | Eigen::ComputeFullV);
  s.sigma = svd.singularValues();
  if (s.sigma.minCoeff() <= 0.0) return s;
  const Mat V = svd.matrixV();
  const Mat Lxinv =
      Lx.template triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  s.R = Lx * V * s.sigma.cwiseSqrt().cwiseInverse().asDiagonal();
  s.Rinv = s.sigma.cwiseSqrt().asDiagonal() * V.transpose() * Lxinv;
  s.Ginv = s.Rinv.transpose() * s.Rinv;
  s.ok = true;
  return s;
}

}  // namespace

Eigen::MatrixXd LmiBlock::instantiate(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd X = constant;
  for (const Term& t : terms) {
    X(t.row, t.col) += t.value * y[t.var];
    if (t.row != t.col) X(t.col, t.row) += t.value * y[t.var];
  }
  return X;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

ConicSolution solve(const ConicProgram& prog, const SolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve: tol must be > 0");

  // Internal copy: lower bounds become 1x1 blocks appended at the end.
  std::vector<LmiBlock> blocks = prog.blocks;
  for (const auto& [var, lb] : prog.lower_bounds) {
    LmiBlock b;
    b.side = 1;
    b.constant = Eigen::MatrixXd::Constant(1, 1, -lb);
    b.terms = {{var, 0, 0, 1.0}};
    blocks.push_back(std::move(b));
  }

  const int nvar = prog.nvar;
  const int neq = static_cast<int>(prog.F.rows());
  const int nblk = static_cast<int>(blocks.size());

  ConicSolution sol;
  sol.y = Eigen::VectorXd::Zero(nvar);
  sol.eq_multipliers = Eigen::VectorXd::Zero(neq);

  // Degenerate program: nothing to do.
  if (nblk == 0 && neq == 0) {
    sol.status = prog.c.size() == 0 || prog.c.isZero(0.0)
                     ? SolveStatus::Optimal
                     : SolveStatus::DualInfeasible;
    return sol;
  }

  // Row equilibration (Ruiz) of the equalities and unit-norm objective.
  Mat F = prog.F.cast<Real>();
  Vec g = prog.g.cast<Real>();
  Vec row_scale = Vec::Ones(neq);
  if (opts.equilibrate && neq > 0) {
    for (int pass = 0; pass < 5; ++pass) {
      for (int i = 0; i < neq; ++i) {
        const Real m = F.row(i).cwiseAbs().maxCoeff();
        if (m <= 0.0) continue;
        const Real s = 1.0 / std::sqrt((double)m);
        F.row(i) *= s;
        g[i] *= s;
        row_scale[i] *= s;
      }
    }
  }
  const Real obj_scale =
      std::max(1.0, prog.c.size() > 0 ? prog.c.cwiseAbs().maxCoeff() : 1.0);
  const Vec c = prog.c.cast<Real>() / obj_scale;

  std::vector<BlockVars> bvars;
  bvars.reserve(nblk);
  for (const LmiBlock& b : blocks) bvars.push_back(group_by_var(b));

  std::vector<Mat> Bc(nblk);
  for (int j = 0; j < nblk; ++j) Bc[j] = blocks[j].constant.cast<Real>();

  // Infeasible start: X, Z proportional to identity at the data scale.
  std::vector<Mat> X(nblk), Z(nblk);
  Real total_side = 0.0;
  for (int j = 0; j < nblk; ++j) {
    Real scale = 1.0 + Bc[j].norm();
    for (const LmiBlock::Term& t : blocks[j].terms)
      scale = std::max<Real>(scale, std::abs(t.value));
    X[j] = scale * Mat::Identity(blocks[j].side, blocks[j].side);
    Z[j] = scale * Mat::Identity(blocks[j].side, blocks[j].side);
    total_side += blocks[j].side;
  }

  Vec y = Vec::Zero(nvar);
  Vec lam = Vec::Zero(neq);

  const Real gnorm = neq > 0 ? 1.0 + g.cwiseAbs().maxCoeff() : 1.0;
  const Real cnorm = 1.0 + c.cwiseAbs().maxCoeff();

  // Polish the dual iterate (lam, Z) by alternating projections: project
  // jointly onto the affine set {F^T lam + A*(Z) = c} (minimum-norm move,
  // whose normal matrix is constant and factored once), then project each Z
  // block back onto the PSD cone. The interior-point iterations hit a
  // round-off floor on degenerate instances; this restores dual feasibility
  // to near machine precision so the recovered certificate is sharp.
  auto polish_dual = [&]() {
    if (nvar == 0) return;
    Mat H = neq > 0 ? Mat(F.transpose() * F) : Mat(Mat::Zero(nvar, nvar));
    for (int j = 0; j < nblk; ++j) {
      // Group the terms of this block by matrix entry.
      std::map<std::pair<int, int>, std::vector<std::pair<int, Real>>> ent;
      for (const LmiBlock::Term& t : blocks[j].terms)
        ent[{t.row, t.col}].push_back({t.var, static_cast<Real>(t.value)});
      for (const auto& [rc, lst] : ent) {
        const Real w = rc.first == rc.second ? 1.0 : 2.0;
        for (const auto& [k, vk] : lst)
          for (const auto& [l, vl] : lst) H(k, l) += w * vk * vl;
      }
    }
    H.diagonal().array() += 1e-14 * (1.0 + H.diagonal().maxCoeff());
    Eigen::LDLT<Mat> ldlt(H);
    if (ldlt.info() != Eigen::Success) return;
    Vec lam_p = lam;
    std::vector<Mat> Zp = Z;
    for (int round = 0; round < 200; ++round) {
      Vec az = Vec::Zero(nvar);
      for (int j = 0; j < nblk; ++j) accumulate_adjoint(blocks[j], Zp[j], az);
      Vec r = c - az;
      if (neq > 0) r -= F.transpose() * lam_p;
      const Real rnorm = r.cwiseAbs().maxCoeff();
      if (!std::isfinite(static_cast<double>(rnorm))) return;
      Vec xi = ldlt.solve(r);
      if (neq > 0) lam_p += F * xi;
      for (int j = 0; j < nblk; ++j)
        for (const LmiBlock::Term& t : blocks[j].terms) {
          Zp[j](t.row, t.col) += xi[t.var] * t.value;
          if (t.row != t.col) Zp[j](t.col, t.row) += xi[t.var] * t.value;
        }
      if (rnorm <= 1e-13 * cnorm) break;  // affine step last: residual tiny
      for (int j = 0; j < nblk; ++j) {
        Eigen::SelfAdjointEigenSolver<Mat> es(Zp[j]);
        if (es.info() != Eigen::Success) return;
        if (es.eigenvalues().minCoeff() >= 0.0) continue;
        Zp[j] = es.eigenvectors() *
                es.eigenvalues().cwiseMax(Real(0)).asDiagonal() *
                es.eigenvectors().transpose();
      }
    }
    lam = lam_p;
    Z = std::move(Zp);
  };

  auto record = [&](ConicSolution& s) {
    polish_dual();
    s.y = y.cast<double>();
    s.eq_multipliers =
        (obj_scale * row_scale.asDiagonal() * lam).eval().cast<double>();
    s.block_duals.clear();
    for (int j = 0; j < static_cast<int>(prog.blocks.size()); ++j)
      s.block_duals.push_back((obj_scale * Z[j]).eval().cast<double>());
    s.primal_objective = prog.c.dot(s.y);
    Real dobj = g.dot(lam);
    for (int j = 0; j < nblk; ++j)
      dobj -= (Bc[j].array() * Z[j].array()).sum();
    s.dual_objective = static_cast<double>(obj_scale * dobj);
    s.gap = std::abs(s.primal_objective - s.dual_objective);
  };

  // Best-iterate bookkeeping: on degenerate instances the residuals hit a
  // numerical floor; progress is then declared over and the best iterate is
  // reported (Optimal when it clears accept_tol).
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;
  Vec y_best = y, lam_best = lam;
  std::vector<Mat> Z_best = Z;
  auto finish = [&](SolveStatus fallback) -> ConicSolution& {
    y = y_best;
    lam = lam_best;
    Z = Z_best;
    record(sol);
    sol.status = best_merit <= opts.accept_tol ? SolveStatus::Optimal : fallback;
    return sol;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Residuals.
    Vec rp = neq > 0 ? Vec(g - F * y) : Vec();
    Vec rd = c;
    if (neq > 0) rd -= F.transpose() * lam;
    {
      Vec az = Vec::Zero(nvar);
      for (int j = 0; j < nblk; ++j) accumulate_adjoint(blocks[j], Z[j], az);
      rd -= az;
    }
    std::vector<Mat> rx(nblk);
    for (int j = 0; j < nblk; ++j)
      rx[j] = Bc[j] + apply_terms<Mat>(blocks[j], y) - X[j];

    Real mu = 0.0;
    for (int j = 0; j < nblk; ++j) mu += (X[j].array() * Z[j].array()).sum();
    const Real gap_abs = mu;
    mu /= std::max<Real>(total_side, 1.0);

    const double pinf =
        neq > 0 ? static_cast<double>(rp.cwiseAbs().maxCoeff() / gnorm) : 0.0;
    Real cinf = 0.0;
    for (int j = 0; j < nblk; ++j)
      cinf = std::max<Real>(cinf, rx[j].cwiseAbs().maxCoeff() /
                                      (1.0 + Bc[j].cwiseAbs().maxCoeff()));
    const double dinf =
        nvar > 0 ? static_cast<double>(rd.cwiseAbs().maxCoeff() / cnorm) : 0.0;

    const Real pobj = c.dot(y);
    Real dobj = neq > 0 ? g.dot(lam) : Real(0);
    for (int j = 0; j < nblk; ++j)
      dobj -= (Bc[j].array() * Z[j].array()).sum();
    const double gap_rel = static_cast<double>(
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj)));

    sol.trace.push_back({static_cast<double>(obj_scale * pobj),
                         static_cast<double>(obj_scale * dobj), pinf, dinf,
                         gap_rel});
    sol.iterations = iter;

    const double merit =
        std::max({pinf, static_cast<double>(cinf), dinf, gap_rel});
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      since_best = 0;
      y_best = y;
      lam_best = lam;
      Z_best = Z;
    } else {
      ++since_best;
    }

    if (merit <= opts.tol) {
      record(sol);
      sol.status = SolveStatus::Optimal;
      return sol;
    }
    if (since_best >= 8) return finish(SolveStatus::MaxIterations);

    // Crude divergence heuristics.
    if (y.cwiseAbs().maxCoeff() > 1e14 || pobj < -1e14) {
      record(sol);
      sol.status = SolveStatus::DualInfeasible;
      return sol;
    }
    if ((neq > 0 && lam.cwiseAbs().maxCoeff() > 1e14)) {
      record(sol);
      sol.status = SolveStatus::PrimalInfeasible;
      return sol;
    }

    // NT scalings.
    std::vector<NtScaling> nt(nblk);
    bool scaling_ok = true;
    for (int j = 0; j < nblk; ++j) {
      nt[j] = nt_scaling(X[j], Z[j]);
      scaling_ok = scaling_ok && nt[j].ok;
    }
    if (!scaling_ok) return finish(SolveStatus::NumericalFailure);

    // Schur complement M = sum_j A_j^T (W^{-1} (.) W^{-1}) A_j.
    Mat M = Mat::Zero(nvar, nvar);
    for (int j = 0; j < nblk; ++j) {
      const BlockVars& bv = bvars[j];
      const Mat& G = nt[j].Ginv;
      for (std::size_t b = 0; b < bv.vars.size(); ++b) {
        const Mat Ab = sparse_matrix(bv.terms[b], blocks[j].side);
        const Mat T = G * Ab * G;
        for (std::size_t a = 0; a <= b; ++a) {
          const Real v = sparse_dot(bv.terms[a], T);
          M(bv.vars[a], bv.vars[b]) += v;
          if (a != b) M(bv.vars[b], bv.vars[a]) += v;
        }
      }
    }
    // Tiny static ridge keeps variables untouched by any block solvable.
    const Real ridge = 1e-16 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
    M.diagonal().array() += ridge;

    Eigen::LDLT<Mat> Mfact(M);
    if (Mfact.info() != Eigen::Success)
      return finish(SolveStatus::NumericalFailure);
    Eigen::LDLT<Mat> Kfact;
    if (neq > 0) {
      Mat K = F * Mfact.solve(Mat(F.transpose()));
      K.diagonal().array() += 1e-16 * (1.0 + K.diagonal().cwiseAbs().maxCoeff());
      Kfact.compute(K);
      if (Kfact.info() != Eigen::Success)
        return finish(SolveStatus::NumericalFailure);
    }

    // Quad copies of the scaling factors: products by W^{-1} amplify
    // rounding by ||W^{-1}||^2, which near a rank-deficient optimum exceeds
    // what long double can absorb.
    std::vector<QMat> Gq(nblk), Rinvq(nblk), rxq(nblk);
    for (int j = 0; j < nblk; ++j) {
      Gq[j] = to_quad(nt[j].Ginv);
      Rinvq[j] = to_quad(nt[j].Rinv);
      rxq[j] = to_quad(rx[j]);
    }

    // Solves the Newton system for a given scaled complementarity rhs Ghat_j
    // (in the NT frame): dZ_j = C_j - W^{-1} dX_j W^{-1},
    // C_j = Rinv' Ghat_j Rinv. Right-hand sides, operator residuals, and dZ
    // are evaluated in quad precision; the correction solves reuse the long
    // double factorizations (iterative refinement).
    auto newton = [&](const std::vector<Mat>& Ghat, Vec& dy, Vec& dlam,
                      std::vector<Mat>& dX, std::vector<Mat>& dZ) {
      std::vector<QMat> Cq(nblk);
      std::vector<Quad> hq(nvar);
      for (int a = 0; a < nvar; ++a) hq[a] = -static_cast<Quad>(rd[a]);
      for (int j = 0; j < nblk; ++j) {
        Cq[j] = qmul_tn(Rinvq[j], qmul(to_quad(Ghat[j]), Rinvq[j]));
        const QMat tmp = qsub(Cq[j], qmul(Gq[j], qmul(rxq[j], Gq[j])));
        q_accumulate_adjoint(blocks[j], tmp, hq);
      }
      Vec h(nvar);
      for (int a = 0; a < nvar; ++a) h[a] = static_cast<Real>(hq[a]);

      const Vec Minv_h = Mfact.solve(h);
      if (neq > 0) {
        dlam = Kfact.solve(Vec(rp - F * Minv_h));
        dy = Mfact.solve(Vec(h + F.transpose() * dlam));
      } else {
        dlam.resize(0);
        dy = Minv_h;
      }
      // Refinement against the true (unridged, quad-evaluated) operator.
      for (int ref = 0; ref < 3; ++ref) {
        std::vector<Quad> rq = hq;
        if (neq > 0) {
          const Vec ft = F.transpose() * dlam;
          for (int a = 0; a < nvar; ++a) rq[a] += static_cast<Quad>(ft[a]);
        }
        for (int j = 0; j < nblk; ++j) {
          const Mat Dj = apply_terms<Mat>(blocks[j], dy);
          const QMat Pj = qmul(Gq[j], qmul(to_quad(Dj), Gq[j]));
          for (const LmiBlock::Term& t : blocks[j].terms) {
            const Quad w = (t.row == t.col) ? 1.0 : 2.0;
            rq[t.var] -= w * static_cast<Quad>(t.value) * Pj(t.row, t.col);
          }
        }
        Vec r1(nvar);
        for (int a = 0; a < nvar; ++a) r1[a] = static_cast<Real>(rq[a]);
        if (neq > 0) {
          const Vec r2 = rp - F * dy;
          const Vec ddlam = Kfact.solve(Vec(r2 - F * Mfact.solve(r1)));
          dy += Mfact.solve(Vec(r1 + F.transpose() * ddlam));
          dlam += ddlam;
        } else {
          dy += Mfact.solve(r1);
        }
      }
      dX.resize(nblk);
      dZ.resize(nblk);
      for (int j = 0; j < nblk; ++j) {
        dX[j] = apply_terms<Mat>(blocks[j], dy) + rx[j];
        const QMat dZq = qsub(Cq[j], qmul(Gq[j], qmul(to_quad(dX[j]), Gq[j])));
        dZ[j] = from_quad(dZq);
        dX[j] = 0.5 * (dX[j] + dX[j].transpose().eval());
        dZ[j] = 0.5 * (dZ[j] + dZ[j].transpose().eval());
      }
    };

    auto step_lengths = [&](const std::vector<Mat>& dX,
                            const std::vector<Mat>& dZ) {
      Real ap = kInf, ad = kInf;
      for (int j = 0; j < nblk; ++j) {
        ap = std::min(ap, max_step(X[j], dX[j]));
        ad = std::min(ad, max_step(Z[j], dZ[j]));
      }
      ap = std::min<Real>(1.0, opts.step_fraction * ap);
      ad = std::min<Real>(1.0, opts.step_fraction * ad);
      return std::pair<Real, Real>(ap, ad);
    };

    // Predictor (affine scaling) direction: Ghat = -Sigma.
    std::vector<Mat> Ghat(nblk);
    for (int j = 0; j < nblk; ++j)
      Ghat[j] = Mat((-nt[j].sigma).eval().asDiagonal());
    Vec dy_a, dlam_a;
    std::vector<Mat> dX_a, dZ_a;
    newton(Ghat, dy_a, dlam_a, dX_a, dZ_a);
    auto [ap_a, ad_a] = step_lengths(dX_a, dZ_a);

    Real gap_aff = 0.0;
    for (int j = 0; j < nblk; ++j)
      gap_aff += ((X[j] + ap_a * dX_a[j]).array() * (Z[j] + ad_a * dZ_a[j]).array())
                     .sum();
    Real sigma = std::pow(
        static_cast<double>(std::max<Real>(gap_aff, 0.0) /
                            std::max<Real>(gap_abs, 1e-300)),
        3.0);
    sigma = std::clamp<Real>(sigma, 1e-12, 1.0);

    // Corrector / combined direction.
    for (int j = 0; j < nblk; ++j) {
      const Mat DXh = nt[j].Rinv * dX_a[j] * nt[j].Rinv.transpose();
      const Mat DZh = nt[j].R.transpose() * dZ_a[j] * nt[j].R;
      Mat E = -0.5 * (DXh * DZh + DZh * DXh);
      E.diagonal().array() += sigma * mu;
      E.diagonal() -= nt[j].sigma.cwiseProduct(nt[j].sigma);
      Mat Gh(blocks[j].side, blocks[j].side);
      for (int r = 0; r < blocks[j].side; ++r)
        for (int cidx = 0; cidx < blocks[j].side; ++cidx)
          Gh(r, cidx) = 2.0 * E(r, cidx) / (nt[j].sigma[r] + nt[j].sigma[cidx]);
      Ghat[j] = 0.5 * (Gh + Gh.transpose().eval());
    }
    Vec dy, dlam;
    std::vector<Mat> dX, dZ;
    newton(Ghat, dy, dlam, dX, dZ);
    auto [ap, ad] = step_lengths(dX, dZ);
    if (ap <= 0.0 || ad <= 0.0) return finish(SolveStatus::NumericalFailure);

    y += ap * dy;
    if (neq > 0) lam += ad * dlam;
    for (int j = 0; j < nblk; ++j) {
      X[j] += ap * dX[j];
      Z[j] += ad * dZ[j];
    }
  }

  return finish(SolveStatus::MaxIterations);
}

PreprocessReport preprocess(ConicProgram& p) {
  PreprocessReport rep;
  const int neq = static_cast<int>(p.F.rows());
  if (neq == 0) return rep;

  std::vector<int> keep;
  for (int i = 0; i < neq; ++i) {
    if (p.F.row(i).cwiseAbs().maxCoeff() == 0.0) {
      if (std::abs(p.g[i]) > 0.0) {
        rep.infeasible = true;
        rep.message = "row " + std::to_string(i) + ": 0 = nonzero";
      }
      rep.removed_rows.push_back(i);
    } else {
      keep.push_back(i);
    }
  }

  // Rank-revealing pass over the surviving rows.
  if (!keep.empty()) {
    Eigen::MatrixXd Fk(keep.size(), p.F.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) Fk.row(i) = p.F.row(keep[i]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Fk.transpose());
    qr.setThreshold(1e-12);
    const int rank = static_cast<int>(qr.rank());
    if (rank < static_cast<int>(keep.size())) {
      std::vector<int> independent(
          qr.colsPermutation().indices().data(),
          qr.colsPermutation().indices().data() + keep.size());
      std::vector<int> indep_rows(independent.begin(), independent.begin() + rank);
      std::sort(indep_rows.begin(), indep_rows.end());
      Eigen::MatrixXd Fi(rank, p.F.cols());
      Eigen::VectorXd gi(rank);
      for (int i = 0; i < rank; ++i) {
        Fi.row(i) = Fk.row(indep_rows[i]);
        gi[i] = p.g[keep[indep_rows[i]]];
      }
      // Consistency of the dropped rows: their rhs must match the linear
      // combination reconstructing them from the independent rows.
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qri(Fi.transpose());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (std::binary_search(indep_rows.begin(), indep_rows.end(),
                               static_cast<int>(i)))
          continue;
        rep.removed_rows.push_back(keep[i]);
        const Eigen::VectorXd w = qri.solve(Fk.row(i).transpose());
        const double predicted = w.dot(gi);
        if (std::abs(predicted - p.g[keep[i]]) >
            1e-9 * (1.0 + std::abs(p.g[keep[i]]))) {
          rep.infeasible = true;
          rep.message = "row " + std::to_string(keep[i]) +
                        ": inconsistent with preceding rows";
        }
      }
      p.F = Fi;
      p.g = gi;
      std::sort(rep.removed_rows.begin(), rep.removed_rows.end());
      return rep;
    }
  }

  if (!rep.removed_rows.empty()) {
    Eigen::MatrixXd Fk(keep.size(), p.F.cols());
    Eigen::VectorXd gk(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      Fk.row(i) = p.F.row(keep[i]);
      gk[i] = p.g[keep[i]];
    }
    p.F = Fk;
    p.g = gk;
  }
  return rep;
}

ResidualReport residuals(const ConicProgram& p, const ConicSolution& s) {
  ResidualReport r;
  if (p.F.rows() > 0)
    r.eq_infeasibility = (p.F * s.y - p.g).cwiseAbs().maxCoeff();
  Eigen::VectorXd rd = p.c;
  if (p.F.rows() > 0) rd -= p.F.transpose() * s.eq_multipliers;
  for (std::size_t j = 0; j < p.blocks.size(); ++j) {
    const Eigen::MatrixXd X = p.blocks[j].instantiate(s.y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
    r.block_min_eig.push_back(es.eigenvalues().minCoeff());
    if (j < s.block_duals.size())
      r.block_complementarity.push_back(
          (X.array() * s.block_duals[j].array()).sum());
  }
  {
    Eigen::VectorXd az = Eigen::VectorXd::Zero(p.nvar);
    for (std::size_t j = 0; j < p.blocks.size() && j < s.block_duals.size(); ++j)
      accumulate_adjoint(p.blocks[j], s.block_duals[j], az);
    rd -= az;
  }
  r.dual_infeasibility = p.nvar > 0 ? rd.cwiseAbs().maxCoeff() : 0.0;

  double dobj = p.F.rows() > 0 ? p.g.dot(s.eq_multipliers) : 0.0;
  for (std::size_t j = 0; j < p.blocks.size() && j < s.block_duals.size(); ++j)
    dobj -= (p.blocks[j].constant.array() * s.block_duals[j].array()).sum();
  r.duality_gap = std::abs(p.c.dot(s.y) - dobj);
  return r;
}

void write_sdpa(const ConicProgram& p, std::ostream& os) {
  // Dual-form encoding: variables y, constraints sum_a y_a F_a - F_0 >= 0.
  // Equalities become a diagonal block with paired +/- rows.
  const int neq = static_cast<int>(p.F.rows());
  const int nlmi = static_cast<int>(p.blocks.size());
  const int nbound = static_cast<int>(p.lower_bounds.size());
  const int nblocks = nlmi + (neq > 0 ? 1 : 0) + (nbound > 0 ? 1 : 0);

  os << p.nvar << "\n";
  os << nblocks << "\n";
  for (int j = 0; j < nlmi; ++j) os << p.blocks[j].side << (j + 1 < nblocks ? " " : "");
  if (neq > 0) os << (nlmi > 0 ? " " : "") << -(2 * neq);
  if (nbound > 0) os << " " << -nbound;
  os << "\n";
  os.precision(17);
  for (int a = 0; a < p.nvar; ++a) os << (a ? " " : "") << p.c[a];
  os << "\n";

  // F_0 = -constant per LMI block.
  for (int j = 0; j < nlmi; ++j) {
    const Eigen::MatrixXd& B = p.blocks[j].constant;
    for (int r = 0; r < B.rows(); ++r)
      for (int cidx = r; cidx < B.cols(); ++cidx)
        if (B(r, cidx) != 0.0)
          os << 0 << " " << (j + 1) << " " << (r + 1) << " " << (cidx + 1)
             << " " << -B(r, cidx) << "\n";
  }
  if (neq > 0) {
    const int blk = nlmi + 1;
    for (int i = 0; i < neq; ++i) {
      if (p.g[i] != 0.0) {
        os << 0 << " " << blk << " " << (i + 1) << " " << (i + 1) << " "
           << p.g[i] << "\n";
        os << 0 << " " << blk << " " << (neq + i + 1) << " " << (neq + i + 1)
           << " " << -p.g[i] << "\n";
      }
    }
  }
  if (nbound > 0) {
    const int blk = nlmi + (neq > 0 ? 1 : 0) + 1;
    for (int i = 0; i < nbound; ++i)
      if (p.lower_bounds[i].second != 0.0)
        os << 0 << " " << blk << " " << (i + 1) << " " << (i + 1) << " "
           << p.lower_bounds[i].second << "\n";
  }

  for (int a = 0; a < p.nvar; ++a) {
    for (int j = 0; j < nlmi; ++j)
      for (const LmiBlock::Term& t : p.blocks[j].terms)
        if (t.var == a)
          os << (a + 1) << " " << (j + 1) << " " << (t.row + 1) << " "
             << (t.col + 1) << " " << t.value << "\n";
    if (neq > 0) {
      const int blk = nlmi + 1;
      for (int i = 0; i < neq; ++i)
        if (p.F(i, a) != 0.0) {
          os << (a + 1) << " " << blk << " " << (i + 1) << " " << (i + 1)
             << " " << p.F(i, a) << "\n";
          os << (a + 1) << " " << blk << " " << (neq + i + 1) << " "
             << (neq + i + 1) << " " << -p.F(i, a) << "\n";
        }
    }
    if (nbound > 0) {
      const int blk = nlmi + (neq > 0 ? 1 : 0) + 1;
      for (int i = 0; i < nbound; ++i)
        if (p.lower_bounds[i].first == a)
          os << (a + 1) << " " << blk << " " << (i + 1) << " " << (i + 1)
             << " " << 1.0 << "\n";
    }
  }
}

}  // namespace pwamc
