// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "certrom/benchmark.hpp"
#include "certrom/sensitivity.hpp"

using namespace certrom;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const Benchmark& coarse() {
  static const Benchmark b = [] {
    BenchmarkConfig c;
    c.subdivisions = 6;
    return build_benchmark(c);
  }();
  return b;
}

std::vector<double> random_design(const AffineModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u1(8.0, 30.0), u2(1.5, 8.0), u3(5.0, 9.0);
  for (;;) {
    std::vector<double> p{u1(rng), u2(rng), u3(rng)};
    if (m.is_admissible(p)) return p;
  }
}

double rel_frobenius(const SparseMatrix& a, const SparseMatrix& b) {
  return SparseMatrix(a - b).norm() / b.norm();
}

}  // namespace

TEST_CASE("multi-index helpers") {
  CHECK(total_order({1, 0, 2}) == 3);
  CHECK(to_directions({1, 0, 2}) == std::vector<int>{0, 2, 2});
  CHECK(unit_index(4, 3, 2) == MultiIndex{0, 0, 0, 2});
  CHECK(nonzero_sub_indices({1, 1}).size() == 3);
  CHECK(nonzero_sub_indices({0, 2}).size() == 2);
  CHECK(multi_binomial({2, 3}, {1, 2}) == 6.0);
  CHECK(subtract({2, 3}, {1, 2}) == MultiIndex{1, 1});
}

TEST_CASE("theta derivatives are exact") {
  auto th = ThetaFunction::make("p1^2 sin(p2)", [](auto x) {
    using std::sin;
    return x[0] * x[0] * sin(x[1]);
  });
  std::vector<double> x{1.5, 0.3};
  CHECK(th.value(x) == doctest::Approx(2.25 * std::sin(0.3)));
  CHECK(th.derivative(x, {1, 0}) == doctest::Approx(3.0 * std::sin(0.3)));
  CHECK(th.derivative(x, {2, 0}) == doctest::Approx(2.0 * std::sin(0.3)));
  CHECK(th.derivative(x, {1, 1}) == doctest::Approx(3.0 * std::cos(0.3)));
  CHECK(th.derivative(x, {2, 1}) == doctest::Approx(2.0 * std::cos(0.3)));
  CHECK(th.derivative(x, {0, 3}) == doctest::Approx(-2.25 * std::cos(0.3)));
  CHECK(th.derivative(x, {3, 0}) == 0.0);
  CHECK_THROWS_AS((void)th.derivative(x, {2, 2}), InvalidInput);
  CHECK(ThetaFunction::constant(4.0).derivative(x, {1, 0}) == 0.0);
}

TEST_CASE("two-term operator") {
  AffineModel m;
  m.num_design = 1;
  m.reference = {1.0};
  m.lower = {0.1};
  m.upper = {10.0};
  SparseMatrix k1(2, 2), k2(2, 2);
  k1.insert(0, 0) = 1.0;
  k1.insert(1, 1) = 2.0;
  k2.insert(0, 0) = 1.0;
  k2.insert(0, 1) = -0.5;
  k2.insert(1, 0) = -0.5;
  k2.insert(1, 1) = 1.0;
  m.stiffness.terms.push_back({ThetaFunction::make("2p", [](auto x) { return 2.0 * x[0]; }), k1});
  m.stiffness.terms.push_back({ThetaFunction::make("3p^2", [](auto x) { return 3.0 * x[0] * x[0]; }), k2});
  m.stiffness.blocks = {{1, {0}}, {1, {1}}};
  std::vector<double> p{1.0};
  Matrix k = Matrix(eval_operator(m, p));
  CHECK((k - Matrix(2.0 * k1 + 3.0 * k2)).norm() == 0.0);
  std::vector<double> p2{2.0};
  CHECK((Matrix(eval_operator_derivative(m, p2, 0, 1)) - Matrix(2.0 * k1 + 12.0 * k2)).norm() < 1e-14);
  CHECK((Matrix(eval_operator_derivative(m, p2, 0, 2)) - Matrix(6.0 * k2)).norm() < 1e-14);
  CHECK_THROWS_AS(eval_operator_derivative(m, p2, 0, 3), InvalidInput);
  std::vector<double> bad{20.0};
  CHECK_THROWS_AS(eval_operator(m, bad), InvalidInput);
}

TEST_CASE("benchmark reference normalization") {
  const auto& b = coarse();
  const auto& m = b.model;
  std::vector<double> phi{90.0};
  auto x = m.variables(m.reference, phi);
  for (const auto& t : m.stiffness.terms) {
    const bool diagonal = t.theta.descriptor().find(".xy") == std::string::npos;
    CHECK(t.theta.value(x) == doctest::Approx(diagonal ? 1.0 : 0.0).epsilon(1e-14));
  }
  CHECK(m.stiffness.terms.size() <= 3 * kFramePieces + 3);
  // W = K(p̄) + M is symmetric positive definite.
  CHECK(max_abs_asymmetry(m.weight) < 1e-14);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(m.weight);
  CHECK(ldlt.info() == Eigen::Success);
  CHECK(ldlt.vectorD().minCoeff() > 0.0);
  CHECK(m.output.size() == m.dimension());
}

TEST_CASE("mapped geometry preserves the total area") {
  const auto& b = coarse();
  std::mt19937_64 rng(3);
  const double area = 40.0 * 24.0;
  for (int s = 0; s < 5; ++s) {
    auto p = random_design(b.model, rng);
    Mesh mm = mapped_mesh(b, p);
    double total = 0.0;
    for (int t = 0; t < mm.num_triangles(); ++t) total += mm.signed_area(t);
    CHECK(total == doctest::Approx(area).epsilon(1e-13));
    auto box = b.geometry.magnet_box(p);
    CHECK((box[2] - box[0]) == doctest::Approx(p[0]));
    CHECK((box[3] - box[1]) == doctest::Approx(p[1]));
    CHECK(box[1] == doctest::Approx(p[2]));
  }
}

TEST_CASE("affine operator and load equal assembly on the mapped mesh") {
  const auto& b = coarse();
  const auto& m = b.model;
  std::mt19937_64 rng(5);
  double worst_k = 0.0, worst_f = 0.0;
  for (int s = 0; s < 10; ++s) {
    auto p = random_design(m, rng);
    const double phi_deg = 80.0 + 10.0 * std::uniform_real_distribution<double>()(rng);
    Mesh mm = mapped_mesh(b, p);
    SparseMatrix direct(mm.num_nodes(), mm.num_nodes());
    for (int q = 1; q <= mm.num_subdomains; ++q)
      direct += assemble_subdomain_stiffness(mm, q, Eigen::Matrix2d::Identity());
    SparseMatrix kd = restrict_to_free(direct, b.dofs);
    worst_k = std::max(worst_k, rel_frobenius(eval_operator(m, p), kd));

    Eigen::Vector2d dir(std::cos(phi_deg * kDeg), std::sin(phi_deg * kDeg));
    Vector fd = restrict_to_free(assemble_subdomain_gradient_load(mm, kMagnetLabel, 120.0 * dir), b.dofs);
    std::vector<double> phi{phi_deg};
    worst_f = std::max(worst_f, (eval_rhs(m, p, phi) - fd).norm() / fd.norm());
  }
  CHECK(worst_k <= 1e-12);
  CHECK(worst_f <= 1e-12);
}

TEST_CASE("operator derivatives match finite differences") {
  const auto& m = coarse().model;
  std::mt19937_64 rng(9);
  for (int s = 0; s < 3; ++s) {
    auto p = random_design(m, rng);
    for (int i = 0; i < 3; ++i) {
      auto shifted = [&](double h) {
        auto q = p;
        q[i] += h;
        return eval_operator(m, q);
      };
      const double h1 = 1e-4;
      SparseMatrix fd1 = (shifted(h1) - shifted(-h1)) / (2 * h1);
      CHECK(rel_frobenius(fd1, eval_operator_derivative(m, p, i, 1)) <= 1e-6);
      const double h2 = 1e-3;
      SparseMatrix fd2 = (shifted(h2) - 2.0 * eval_operator(m, p) + shifted(-h2)) / (h2 * h2);
      SparseMatrix d2 = eval_operator_derivative(m, p, i, 2);
      if (d2.norm() > 0) CHECK(rel_frobenius(fd2, d2) <= 1e-5);
    }
  }
}

TEST_CASE("load derivatives in the angle") {
  const auto& m = coarse().model;
  std::vector<double> p{15.0, 5.0, 6.0};
  std::vector<double> phi90{90.0};
  // At 90° only the sin-weighted (vertical) component remains.
  auto x = m.variables(p, phi90);
  Vector aligned = m.load.terms[1].theta.value(x) * m.load.terms[1].component;
  CHECK((eval_rhs(m, p, phi90) - aligned).norm() <= 1e-14 * aligned.norm());
  // d/dφ of the cos-weighted term at 90° is −(π/180) times its weight.
  Vector expect = -kDeg * 120.0 * (p[1] / 7.0) * m.load.terms[0].component;
  CHECK((eval_rhs_derivative(m, p, phi90, 3, 1) - expect).norm() <= 1e-12 * expect.norm());

  std::vector<double> phi{84.0};
  const double h = 1e-2;
  auto at = [&](double d) {
    std::vector<double> ph{phi[0] + d};
    return eval_rhs(m, p, ph);
  };
  Vector fd2 = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
  Vector d2 = eval_rhs_derivative(m, p, phi, 3, 2);
  CHECK((fd2 - d2).norm() <= 1e-5 * d2.norm());
  CHECK_THROWS_AS(eval_rhs_derivative(m, p, phi, 3, 4), InvalidInput);
}

TEST_CASE("inadmissible designs are rejected with the bound named") {
  const auto& m = coarse().model;
  std::vector<double> p{19.0, 9.0, 12.0};  // magnet top above the frame
  try {
    (void)eval_operator(m, p);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("magnet top") != std::string::npos);
  }
  BenchmarkConfig c;
  c.subdivisions = 3;
  c.reference = {19.0, 10.0, 12.0};
  CHECK_THROWS_AS(build_benchmark(c), InvalidInput);
}

TEST_CASE("reference output converges at second order") {
  std::vector<double> e0;
  for (int n : {3, 6, 12, 24}) {
    BenchmarkConfig c;
    c.subdivisions = n;
    Benchmark b = build_benchmark(c);
    std::vector<double> phi{90.0};
    Vector u = solve_state(b.model, b.model.reference, phi);
    e0.push_back(b.model.output.dot(u));
  }
  const double r1 = (e0[1] - e0[0]) / (e0[2] - e0[1]);
  const double r2 = (e0[2] - e0[1]) / (e0[3] - e0[2]);
  MESSAGE("difference ratios " << r1 << " " << r2);
  CHECK(r2 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("model export lists every term") {
  const auto& m = coarse().model;
  std::stringstream ss;
  write_model(ss, m);
  const std::string s = ss.str();
  CHECK(s.find("frame12.yy") != std::string::npos);
  CHECK(s.find("sin(phi deg)") != std::string::npos);
}
