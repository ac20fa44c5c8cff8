#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include <pwamc/moments.hpp>
#include <pwamc/policy.hpp>
#include <pwamc/problem.hpp>
#include <pwamc/relaxation.hpp>
#include <pwamc/sdp.hpp>

namespace {

using namespace pwamc;

Polynomial random_poly(int nvars, int degree, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial p(nvars);
  for (const Monomial& m : monomials_up_to(nvars, degree))
    p = p + Polynomial::term(m, u(rng));
  return p;
}

void BM_polynomial_multiply(benchmark::State& state) {
  const int nvars = static_cast<int>(state.range(0));
  const int degree = static_cast<int>(state.range(1));
  Polynomial p = random_poly(nvars, degree, 1);
  Polynomial q = random_poly(nvars, degree, 2);
  for (auto _ : state) benchmark::DoNotOptimize(p * q);
}
BENCHMARK(BM_polynomial_multiply)->Args({2, 4})->Args({2, 8})->Args({3, 6});

void BM_moment_template(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto basis = std::make_shared<MomentBasis>(2, d);
    benchmark::DoNotOptimize(build_moment_template(basis, d));
  }
}
BENCHMARK(BM_moment_template)->Arg(3)->Arg(6);

void BM_relaxation_assemble(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  PwaOcp ocp = builtin_example();
  PwaOcp scaled = apply_scaling(ocp, unit_box_scaling(ocp));
  for (auto _ : state) benchmark::DoNotOptimize(assemble(scaled, d));
}
BENCHMARK(BM_relaxation_assemble)->Arg(2)->Arg(4)->Arg(6);

void BM_sdp_solve_order(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  PwaOcp ocp = builtin_example();
  PwaOcp scaled = apply_scaling(ocp, unit_box_scaling(ocp));
  LmiRelaxation rel = assemble(scaled, d);
  for (auto _ : state) benchmark::DoNotOptimize(solve(rel.program));
}
BENCHMARK(BM_sdp_solve_order)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_policy_step(benchmark::State& state) {
  PwaOcp ocp = builtin_example();
  Polynomial v = random_poly(1, 6, 3);
  ValueGradient grad = polynomial_gradient(v);
  Eigen::VectorXd x(1), u(1);
  x << -0.5;
  PolicyConfig cfg;
  for (auto _ : state) {
    auto [ustar, q] = static_min(grad(x), ocp.cells[1], x, ocp.input_box);
    benchmark::DoNotOptimize(
        integrate_hold(ocp, 1, x, ustar, 0.0, cfg.diameter, cfg));
  }
}
BENCHMARK(BM_policy_step);

}  // namespace

BENCHMARK_MAIN();
