// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "certrom/benchmark.hpp"
#include "certrom/sensitivity.hpp"

using namespace certrom;

namespace {

const Benchmark& bench() {
  static const Benchmark b = [] {
    BenchmarkConfig c;
    c.subdivisions = 6;
    return build_benchmark(c);
  }();
  return b;
}

const std::vector<double> kP{16.0, 5.0, 6.5};
const std::vector<double> kPhi{86.0};

Vector state_at(const AffineModel& m, std::vector<double> p, std::vector<double> phi) {
  return solve_state(m, p, phi);
}

}  // namespace

TEST_CASE("zero load gives zero state") {
  BenchmarkConfig c;
  c.subdivisions = 3;
  c.magnetization = 0.0;
  Benchmark b = build_benchmark(c);
  CHECK(solve_state(b.model, kP, kPhi).norm() == 0.0);
  FullOrderSolver s(b.model, kP);
  auto out = output_and_gradients(b.model, s.solve(kPhi, design_gradient_indices(b.model)));
  CHECK(out.e0 == 0.0);
  CHECK(out.dp.norm() == 0.0);
}

TEST_CASE("state at the reference equals a direct solve") {
  const auto& m = bench().model;
  Vector u = solve_state(m, m.reference, kPhi);
  Vector direct = Eigen::SimplicialLDLT<SparseMatrix>(m.stiffness.evaluate(m.variables(m.reference, kPhi)))
                      .solve(eval_rhs(m, m.reference, kPhi));
  CHECK((u - direct).norm() <= 1e-10 * direct.norm());
  SensitivityMap none;
  CHECK((solve_sensitivity(m, m.reference, kPhi, none, MultiIndex(4, 0)) - u).norm() == 0.0);
}

TEST_CASE("first p-sensitivities match central differences at second order") {
  const auto& m = bench().model;
  SensitivityMap lower{{MultiIndex(4, 0), solve_state(m, kP, kPhi)}};
  for (int i = 0; i < 3; ++i) {
    Vector exact = solve_sensitivity(m, kP, kPhi, lower, unit_index(4, i));
    auto fd = [&](double h) {
      auto a = kP, b = kP;
      a[i] += h;
      b[i] -= h;
      return Vector((state_at(m, a, kPhi) - state_at(m, b, kPhi)) / (2 * h));
    };
    const double e1 = (fd(1e-2) - exact).norm() / exact.norm();
    const double e2 = (fd(5e-3) - exact).norm() / exact.norm();
    CHECK((fd(1e-4) - exact).norm() / exact.norm() <= 1e-5);
    CHECK(std::log2(e1 / e2) >= 1.9);
  }
}

TEST_CASE("second angle sensitivity matches the second difference") {
  const auto& m = bench().model;
  FullOrderSolver s(m, kP);
  MultiIndex aa = unit_index(4, 3, 2);
  auto b = s.solve(kPhi, {aa});
  CHECK(b.has(unit_index(4, 3)));
  auto at = [&](double d) { return state_at(m, kP, {kPhi[0] + d}); };
  const double h = 1e-2;
  Vector fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
  CHECK((fd - b.at(aa)).norm() <= 1e-4 * b.at(aa).norm());
}

TEST_CASE("mixed and third-order sensitivities") {
  const auto& m = bench().model;
  FullOrderSolver s(m, kP);
  MultiIndex mixed{1, 0, 0, 1};
  MultiIndex third{0, 1, 0, 2};
  auto b = s.solve(kPhi, {mixed, third});
  auto dphi = [&](std::vector<double> p) {
    FullOrderSolver t(m, p);
    return Vector(t.solve(kPhi, {unit_index(4, 3)}).at(unit_index(4, 3)));
  };
  const double h = 1e-4;
  auto pa = kP, pb = kP;
  pa[0] += h;
  pb[0] -= h;
  Vector fd = (dphi(pa) - dphi(pb)) / (2 * h);
  CHECK((fd - b.at(mixed)).norm() <= 1e-5 * b.at(mixed).norm());

  auto dphiphi = [&](std::vector<double> p) {
    FullOrderSolver t(m, p);
    return Vector(t.solve(kPhi, {unit_index(4, 3, 2)}).at(unit_index(4, 3, 2)));
  };
  pa = kP;
  pb = kP;
  pa[1] += h;
  pb[1] -= h;
  Vector fd3 = (dphiphi(pa) - dphiphi(pb)) / (2 * h);
  CHECK((fd3 - b.at(third)).norm() <= 1e-5 * b.at(third).norm());
}

TEST_CASE("missing lower orders are reported") {
  const auto& m = bench().model;
  SensitivityMap lower;
  CHECK_THROWS_AS(solve_sensitivity(m, kP, kPhi, lower, unit_index(4, 0)), InvalidInput);
  MultiIndex too_high{2, 2, 0, 0};
  FullOrderSolver s(m, kP);
  CHECK_THROWS_AS(s.solve(kPhi, {too_high}), InvalidInput);
}

TEST_CASE("solver counts every solve and reuses lower orders") {
  const auto& m = bench().model;
  FullOrderSolver s(m, kP);
  auto b = s.solve(kPhi, design_gradient_indices(m));
  CHECK(s.solves() == 4);
  s.extend(b, {unit_index(4, 3, 2)});
  CHECK(s.solves() == 6);
  s.extend(b, {unit_index(4, 3)});
  CHECK(s.solves() == 6);
  SensitivityBundle other;
  other.p = {1.0, 1.0, 5.0};
  CHECK_THROWS_AS(s.extend(other, {unit_index(4, 0)}), InvalidInput);
}

TEST_CASE("output derivatives") {
  const auto& m = bench().model;
  FullOrderSolver s(m, kP);
  auto b = s.solve(kPhi, robust_indices(m, 2));
  auto out = output_and_gradients(m, b);
  CHECK(out.e0 == doctest::Approx(m.output.dot(b.at(MultiIndex(4, 0)))).epsilon(1e-15));

  SensitivityBundle doubled = b;
  for (auto& [k, v] : doubled.u) v *= 2.0;
  CHECK(output_and_gradients(m, doubled).e0 == doctest::Approx(2.0 * out.e0).epsilon(1e-15));
  SensitivityBundle zero = b;
  for (auto& [k, v] : zero.u) v.setZero();
  auto z = output_and_gradients(m, zero);
  CHECK(z.e0 == 0.0);
  CHECK(z.dp.norm() == 0.0);
  CHECK(z.dphi.norm() == 0.0);

  auto e0 = [&](double phi) { return m.output.dot(state_at(m, kP, {phi})); };
  const double h = 1e-4;
  const double fd = (e0(kPhi[0] + h) - e0(kPhi[0] - h)) / (2 * h);
  CHECK(std::abs(fd - out.dphi[0]) <= 1e-5 * std::abs(out.dphi[0]));
  CHECK(out.dphiphi.rows() == 1);

  SensitivityBundle state_only;
  state_only.p = kP;
  state_only.phi = kPhi;
  state_only.u[MultiIndex(4, 0)] = b.at(MultiIndex(4, 0));
  CHECK_THROWS_AS(output_and_gradients(m, state_only), InvalidInput);
}
