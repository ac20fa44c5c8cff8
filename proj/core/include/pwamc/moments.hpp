#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <vector>

#include "pwamc/polynomial.hpp"
#include "pwamc/problem.hpp"

namespace pwamc {

/// Graded-lex list of all monomials of degree <= 2d together with the
/// inverse position lookup. One basis is shared by every moment vector and
/// matrix template of a given measure.
class MomentBasis {
 public:
  MomentBasis(int nvars, int order_d);

  int nvars() const { return nvars_; }
  int order() const { return d_; }
  int max_degree() const { return 2 * d_; }
  int size() const { return static_cast<int>(monomials_.size()); }
  const std::vector<Monomial>& monomials() const { return monomials_; }
  const Monomial& monomial(int pos) const { return monomials_[pos]; }

  /// Position of a monomial; throws std::out_of_range if deg > 2d.
  int position(const Monomial& m) const;

 private:
  int nvars_, d_;
  std::vector<Monomial> monomials_;
  std::map<Monomial, int, GradedLexLess> index_;
};

/// Truncated moment sequence aligned with a MomentBasis.
struct MomentVector {
  std::shared_ptr<const MomentBasis> basis;
  Eigen::VectorXd values;

  double mass() const { return values[0]; }
};

/// Symbolic moment/localizing matrix: each entry is a linear functional of
/// the moment vector, stored as (moment position, coefficient) pairs.
/// Symmetric; only built once per (nvars, order, guard) and then shared.
class MatrixTemplate {
 public:
  struct EntryTerm {
    int position;
    double coeff;
  };

  int side() const { return side_; }
  const std::vector<EntryTerm>& entry(int i, int j) const {
    return entries_[i <= j ? flat(i, j) : flat(j, i)];
  }

  /// Numeric instantiation; exactly linear in y.
  Eigen::MatrixXd instantiate(const MomentVector& y) const;

  friend MatrixTemplate build_moment_template(
      std::shared_ptr<const MomentBasis> basis, int half_order);
  friend MatrixTemplate build_localizing_template(
      const Polynomial& p, std::shared_ptr<const MomentBasis> basis, int d);

 private:
  int flat(int i, int j) const { return i * side_ - i * (i - 1) / 2 + (j - i); }
  int side_ = 0;
  std::shared_ptr<const MomentBasis> basis_;
  std::vector<std::vector<EntryTerm>> entries_;  // upper triangle, row-major
};

/// Moment matrix template of half-order d': entry (i,j) is the moment of
/// m_i * m_j for m_i, m_j of degree <= d'. Requires 2*d' <= basis max degree.
MatrixTemplate build_moment_template(std::shared_ptr<const MomentBasis> basis,
                                     int half_order);

/// Localizing matrix template M_{d'}(p y) with d' = d - ceil(deg p / 2):
/// entry (i,j) = sum_g p_g * (moment of m_i * m_j * x^g). Throws if
/// deg p > 2d.
MatrixTemplate build_localizing_template(const Polynomial& p,
                                         std::shared_ptr<const MomentBasis> basis,
                                         int d);

/// Riesz functional: l_y(p) = sum_a p_a y_a. Throws if deg p exceeds the
/// basis degree.
double riesz(const MomentVector& y, const Polynomial& p);

/// Exact moments of an initial measure up to the basis degree. Dirac gives
/// powers of the point; UniformBox gives normalized products of interval
/// moments.
MomentVector analytic_moments(const InitialMeasure& meas,
                              std::shared_ptr<const MomentBasis> basis);

}  // namespace pwamc
