#include "pwamc/moments.hpp"

#include <cmath>
#include <stdexcept>

namespace pwamc {

MomentBasis::MomentBasis(int nvars, int order_d) : nvars_(nvars), d_(order_d) {
  if (order_d < 0) throw std::invalid_argument("MomentBasis: order must be >= 0");
  monomials_ = monomials_up_to(nvars, 2 * order_d);
  for (int i = 0; i < static_cast<int>(monomials_.size()); ++i)
    index_[monomials_[i]] = i;
}

int MomentBasis::position(const Monomial& m) const {
  auto it = index_.find(m);
  if (it == index_.end())
    throw std::out_of_range("MomentBasis: monomial beyond degree 2d");
  return it->second;
}

Eigen::MatrixXd MatrixTemplate::instantiate(const MomentVector& y) const {
  if (y.basis.get() != basis_.get() && !(y.basis && basis_ && y.basis->nvars() == basis_->nvars() &&
                                         y.basis->order() == basis_->order()))
    throw std::invalid_argument("MatrixTemplate::instantiate: basis mismatch");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(side_, side_);
  for (int i = 0; i < side_; ++i)
    for (int j = i; j < side_; ++j) {
      double v = 0.0;
      for (const EntryTerm& t : entries_[flat(i, j)]) v += t.coeff * y.values[t.position];
      M(i, j) = v;
      M(j, i) = v;
    }
  return M;
}

MatrixTemplate build_moment_template(std::shared_ptr<const MomentBasis> basis,
                                     int half_order) {
  if (half_order < 0)
    throw std::invalid_argument("build_moment_template: half_order < 0");
  if (2 * half_order > basis->max_degree())
    throw std::invalid_argument("build_moment_template: half_order exceeds basis");
  const std::vector<Monomial> rows = monomials_up_to(basis->nvars(), half_order);
  MatrixTemplate t;
  t.basis_ = basis;
  t.side_ = static_cast<int>(rows.size());
  t.entries_.resize(t.side_ * (t.side_ + 1) / 2);
  for (int i = 0; i < t.side_; ++i)
    for (int j = i; j < t.side_; ++j) {
      Monomial prod(basis->nvars());
      for (int k = 0; k < basis->nvars(); ++k)
        prod.exponents[k] = rows[i].exponents[k] + rows[j].exponents[k];
      t.entries_[t.flat(i, j)] = {{basis->position(prod), 1.0}};
    }
  return t;
}

MatrixTemplate build_localizing_template(const Polynomial& p,
                                         std::shared_ptr<const MomentBasis> basis,
                                         int d) {
  if (p.nvars() != basis->nvars())
    throw std::invalid_argument("build_localizing_template: variable mismatch");
  const int degp = std::max(p.degree(), 0);
  if (degp > 2 * d)
    throw std::invalid_argument("build_localizing_template: guard degree exceeds 2d");
  const int half = d - (degp + 1) / 2;
  const std::vector<Monomial> rows = monomials_up_to(basis->nvars(), half);
  MatrixTemplate t;
  t.basis_ = basis;
  t.side_ = static_cast<int>(rows.size());
  t.entries_.resize(t.side_ * (t.side_ + 1) / 2);
  for (int i = 0; i < t.side_; ++i)
    for (int j = i; j < t.side_; ++j) {
      std::vector<MatrixTemplate::EntryTerm> terms;
      terms.reserve(p.terms().size());
      for (const auto& [mono, coeff] : p.terms()) {
        Monomial prod(basis->nvars());
        for (int k = 0; k < basis->nvars(); ++k)
          prod.exponents[k] =
              rows[i].exponents[k] + rows[j].exponents[k] + mono.exponents[k];
        terms.push_back({basis->position(prod), coeff});
      }
      t.entries_[t.flat(i, j)] = std::move(terms);
    }
  return t;
}

double riesz(const MomentVector& y, const Polynomial& p) {
  if (p.nvars() != y.basis->nvars())
    throw std::invalid_argument("riesz: variable mismatch");
  if (p.degree() > y.basis->max_degree())
    throw std::out_of_range("riesz: polynomial degree exceeds basis");
  double v = 0.0;
  for (const auto& [mono, coeff] : p.terms())
    v += coeff * y.values[y.basis->position(mono)];
  return v;
}

MomentVector analytic_moments(const InitialMeasure& meas,
                              std::shared_ptr<const MomentBasis> basis) {
  const int n = basis->nvars();
  if (meas.kind == InitialMeasure::Kind::Dirac && meas.point.size() != n)
    throw std::invalid_argument("analytic_moments: dimension mismatch");
  MomentVector y;
  y.basis = basis;
  y.values.resize(basis->size());
  for (int pos = 0; pos < basis->size(); ++pos) {
    const Monomial& mono = basis->monomial(pos);
    double v = 1.0;
    if (meas.kind == InitialMeasure::Kind::Dirac) {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < mono.exponents[i]; ++k) v *= meas.point[i];
    } else {
      // Uniform on the box, normalized to mass one: per-coordinate moment of
      // x^e is (hi^{e+1} - lo^{e+1}) / ((e+1)(hi - lo)).
      for (int i = 0; i < n; ++i) {
        const int e = mono.exponents[i];
        if (e == 0) continue;
        const double lo = meas.lo[i], hi = meas.hi[i];
        v *= (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / ((e + 1) * (hi - lo));
      }
    }
    y.values[pos] = v;
  }
  return y;
}

}  // namespace pwamc
