#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pwamc {

/// Exponent vector of a monomial x^a = prod_i x_i^{a_i}.
struct Monomial {
  std::vector<int> exponents;

  Monomial() = default;
  explicit Monomial(std::vector<int> e) : exponents(std::move(e)) {}
  explicit Monomial(int nvars) : exponents(nvars, 0) {}

  int nvars() const { return static_cast<int>(exponents.size()); }
  int degree() const;

  bool operator==(const Monomial& o) const { return exponents == o.exponents; }
};

/// Graded lexicographic order: first by total degree, then lexicographic on
/// the exponent vector. This is the canonical term order everywhere; moment
/// indices and SDP rows inherit their determinism from it.
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// Sparse multivariate polynomial over a fixed number of variables with
/// double coefficients. Immutable in spirit: all operations return new
/// values. Zero coefficients are never stored.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  Polynomial() : Polynomial(0) {}
  explicit Polynomial(int nvars);

  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int index, double coeff = 1.0);
  static Polynomial term(Monomial m, double coeff);

  int nvars() const { return nvars_; }
  int degree() const;          // -1 for the zero polynomial
  bool is_zero() const { return terms_.empty(); }
  const TermMap& terms() const { return terms_; }

  double coefficient(const Monomial& m) const;
  void set_coefficient(const Monomial& m, double c);

  Polynomial operator+(const Polynomial& q) const;
  Polynomial operator-(const Polynomial& q) const;
  Polynomial operator-() const;
  Polynomial operator*(const Polynomial& q) const;
  Polynomial operator*(double s) const;

  Polynomial partial_derivative(int var) const;

  /// Direct per-term evaluation with compensated (Kahan) summation.
  double evaluate(const Eigen::VectorXd& point) const;

  /// Compose with the affine change of variables x <- S x' + c and expand.
  /// S is nvars x nvars, c has length nvars.
  Polynomial substitute_affine(const Eigen::MatrixXd& S,
                               const Eigen::VectorXd& c) const;

  /// Fix the first n_fixed variables to the given values; the result is a
  /// polynomial in the remaining nvars - n_fixed variables.
  Polynomial partial_evaluate_prefix(const Eigen::VectorXd& values) const;

  /// Canonical text form, e.g. "2*x1^2 - 4*x1 + 2 + u1^2". Variables
  /// 0..n_state-1 print as x1..xn, the rest as u1..um.
  std::string to_string(int n_state) const;

  /// Parse the grammar used in problem files: +, -, *, ^, parentheses,
  /// decimal literals, variables x1..xn and u1..um. Throws
  /// std::invalid_argument with a position on malformed input.
  static Polynomial parse(const std::string& text, int n_state, int n_input);

  bool operator==(const Polynomial& q) const;

 private:
  int nvars_;
  TermMap terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

/// All monomials in nvars variables of total degree <= degree, in graded-lex
/// order. Length is C(nvars + degree, nvars).
std::vector<Monomial> monomials_up_to(int nvars, int degree);

/// C(n + d, n) as a 64-bit integer.
std::int64_t monomial_count(int nvars, int degree);

}  // namespace pwamc
