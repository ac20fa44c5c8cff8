#include <doctest.h>

#include <memory>
#include <random>

#include <pwamc/moments.hpp>

using namespace pwamc;

namespace {

MomentVector random_moments(std::mt19937& rng,
                            std::shared_ptr<const MomentBasis> basis) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MomentVector y;
  y.basis = basis;
  y.values = Eigen::VectorXd::NullaryExpr(basis->size(), [&](Eigen::Index) {
    return u(rng);
  });
  return y;
}

Polynomial random_poly(std::mt19937& rng, int nvars, int degree) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial p(nvars);
  for (const Monomial& m : monomials_up_to(nvars, degree))
    p = p + Polynomial::term(m, u(rng));
  return p;
}

}  // namespace

TEST_CASE("moment basis enumerates graded-lex and inverts positions") {
  MomentBasis basis(2, 2);
  CHECK(basis.size() == 15);  // C(2+4, 2)
  CHECK(basis.max_degree() == 4);
  for (int i = 0; i < basis.size(); ++i)
    CHECK(basis.position(basis.monomial(i)) == i);
  CHECK_THROWS_AS(basis.position(Monomial(std::vector<int>{5, 0})), std::out_of_range);
}

TEST_CASE("Dirac moments are exact monomial powers") {
  InitialMeasure mu;
  mu.kind = InitialMeasure::Kind::Dirac;
  mu.point = Eigen::VectorXd(2);
  mu.point << -0.5, 2.0;
  auto basis = std::make_shared<MomentBasis>(2, 2);
  MomentVector y = analytic_moments(mu, basis);
  CHECK(y.mass() == 1.0);
  for (int i = 0; i < basis->size(); ++i) {
    const Monomial& m = basis->monomial(i);
    double expect = 1.0;
    for (int v = 0; v < 2; ++v)
      for (int k = 0; k < m.exponents[v]; ++k) expect *= mu.point[v];
    CHECK(y.values[i] == expect);  // exact, not approximate
  }
}

TEST_CASE("uniform box moments match the closed form to 1e-12") {
  InitialMeasure mu;
  mu.kind = InitialMeasure::Kind::UniformBox;
  mu.lo = Eigen::VectorXd(1);
  mu.hi = Eigen::VectorXd(1);
  mu.lo << -1.0;
  mu.hi << 3.0;
  auto basis = std::make_shared<MomentBasis>(1, 3);
  MomentVector y = analytic_moments(mu, basis);
  for (int k = 0; k <= 6; ++k) {
    const double a = -1.0, b = 3.0;
    const double exact =
        (std::pow(b, k + 1) - std::pow(a, k + 1)) / ((k + 1) * (b - a));
    CHECK(y.values[basis->position(Monomial(std::vector<int>{k}))] ==
          doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("riesz functional is linear and matches direct sums") {
  std::mt19937 rng(5);
  auto basis = std::make_shared<MomentBasis>(2, 2);
  MomentVector y = random_moments(rng, basis);
  Polynomial p = random_poly(rng, 2, 3);
  Polynomial q = random_poly(rng, 2, 2);
  CHECK(riesz(y, p * 2.0 + q * (-0.5)) ==
        doctest::Approx(2.0 * riesz(y, p) - 0.5 * riesz(y, q)).epsilon(1e-12));
  CHECK(riesz(y, Polynomial::constant(2, 1.0)) == doctest::Approx(y.mass()));
  CHECK_THROWS(riesz(y, random_poly(rng, 2, 5)));  // beyond basis degree
}

TEST_CASE("quadratic-form identity q'M_d(y)q = l_y(q^2) on 100 random instances") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> nv_dist(1, 3), d_dist(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int nv = nv_dist(rng);
    const int d = d_dist(rng);
    auto basis = std::make_shared<MomentBasis>(nv, d);
    MomentVector y = random_moments(rng, basis);
    MatrixTemplate M = build_moment_template(basis, d);
    Eigen::MatrixXd Md = M.instantiate(y);
    CHECK(Md.isApprox(Md.transpose(), 1e-14));

    Polynomial q = random_poly(rng, nv, d);
    Eigen::VectorXd qv = Eigen::VectorXd::Zero(M.side());
    const auto low = monomials_up_to(nv, d);
    for (int i = 0; i < M.side(); ++i) qv[i] = q.coefficient(low[i]);
    const double lhs = qv.dot(Md * qv);
    const double rhs = riesz(y, q * q);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("localizing matrix satisfies q'M_d(p y)q = l_y(p q^2)") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int nv = 1 + trial % 2;
    const int d = 2;
    auto basis = std::make_shared<MomentBasis>(nv, d);
    MomentVector y = random_moments(rng, basis);
    Polynomial p = random_poly(rng, nv, 2);  // half-order d - 1
    MatrixTemplate M = build_localizing_template(p, basis, d);
    Polynomial q = random_poly(rng, nv, d - 1);
    Eigen::VectorXd qv = Eigen::VectorXd::Zero(M.side());
    const auto low = monomials_up_to(nv, d - 1);
    REQUIRE(static_cast<int>(low.size()) == M.side());
    for (int i = 0; i < M.side(); ++i) qv[i] = q.coefficient(low[i]);
    const double lhs = qv.dot(M.instantiate(y) * qv);
    const double rhs = riesz(y, p * q * q);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("Dirac moment matrix is PSD of rank one") {
  InitialMeasure mu;
  mu.kind = InitialMeasure::Kind::Dirac;
  mu.point = Eigen::VectorXd(2);
  mu.point << 0.3, -0.7;
  auto basis = std::make_shared<MomentBasis>(2, 2);
  MomentVector y = analytic_moments(mu, basis);
  Eigen::MatrixXd Md = build_moment_template(basis, 2).instantiate(y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Md);
  const auto& ev = es.eigenvalues();
  CHECK(ev.minCoeff() >= -1e-12);
  // All eigenvalues but the largest vanish: the representing measure is a
  // single atom.
  for (int i = 0; i + 1 < ev.size(); ++i) CHECK(std::abs(ev[i]) <= 1e-10);
  CHECK(ev[ev.size() - 1] > 0.0);
}

TEST_CASE("degree guards on template construction") {
  auto basis = std::make_shared<MomentBasis>(1, 1);
  CHECK_THROWS(build_moment_template(basis, 2));  // 2*2 > 2d
  Polynomial deep = Polynomial::parse("x1^3", 1, 0);
  CHECK_THROWS(build_localizing_template(deep, basis, 1));
}
