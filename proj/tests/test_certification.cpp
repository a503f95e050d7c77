// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "certrom/benchmark.hpp"
#include "certrom/certification.hpp"
#include "certrom/design.hpp"

using namespace certrom;

namespace {

const Benchmark& bench() {
  static const Benchmark b = [] {
    BenchmarkConfig c;
    c.subdivisions = 3;
    return build_benchmark(c);
  }();
  return b;
}

const StabilityConstants& constants() {
  static const StabilityConstants c = compute_stability_constants(bench().model);
  return c;
}

double wnorm(const SparseMatrix& w, const Vector& v) { return std::sqrt(v.dot(w * v)); }

std::vector<double> random_design(const AffineModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u1(2.0, 35.0), u2(1.0, 12.0), u3(1.0, 14.0);
  for (;;) {
    std::vector<double> p{u1(rng), u2(rng), u3(rng)};
    if (m.is_admissible(p)) return p;
  }
}

// Two scalar blocks K = p·diag(1,0) + (1/p)·diag(0,1) with p̄ = 1 and M = I.
AffineModel two_block_model() {
  AffineModel m;
  m.num_design = 1;
  m.reference = {1.0};
  m.lower = {0.1};
  m.upper = {10.0};
  SparseMatrix k1(2, 2), k2(2, 2), eye(2, 2);
  k1.insert(0, 0) = 1.0;
  k2.insert(1, 1) = 1.0;
  eye.setIdentity();
  m.stiffness.terms.push_back({ThetaFunction::make("p", [](auto x) { return x[0]; }), k1});
  m.stiffness.terms.push_back({ThetaFunction::make("1/p", [](auto x) { return 1.0 / x[0]; }), k2});
  m.stiffness.blocks = {{1, {0}}, {1, {1}}};
  m.mass = eye;
  m.weight = SparseMatrix(k1 + k2 + eye);
  return m;
}

SnapshotSet training(const AffineModel& m, const std::vector<MultiIndex>& idx) {
  SnapshotSet s;
  std::vector<double> phi{90.0};
  for (const auto& p : tensor_grid({10.0, 20.0}, {2.0, 5.0}, {5.0, 8.0})) {
    FullOrderSolver solver(m, p);
    s.add_bundle(solver.solve(phi, idx), idx);
  }
  return s;
}

}  // namespace

TEST_CASE("coercivity and continuity at the reference") {
  const auto& m = bench().model;
  const auto& c = constants();
  CHECK(c.alpha_ref > 0.0);
  CHECK(c.gamma_ref >= c.alpha_ref);
  CHECK(coercivity_lower_bound(m, c, m.reference) == doctest::Approx(c.alpha_ref).epsilon(1e-12));
  CHECK(continuity_upper_bound(m, c, m.reference, MultiIndex(4, 0)) == doctest::Approx(c.gamma_ref).epsilon(1e-12));
  // The operator does not depend on φ.
  CHECK(continuity_upper_bound(m, c, m.reference, MultiIndex{0, 0, 0, 1}) == 0.0);
}

TEST_CASE("min-theta with ratios 2 and 1/2") {
  AffineModel m = two_block_model();
  StabilityConstants c = compute_stability_constants(m);
  CHECK(c.alpha_ref == doctest::Approx(0.5).epsilon(1e-10));
  std::vector<double> p{2.0};
  CHECK(coercivity_lower_bound(m, c, p) == doctest::Approx(0.5 * c.alpha_ref).epsilon(1e-12));
  CHECK(continuity_upper_bound(m, c, p, 0, 0) == doctest::Approx(2.0 * c.gamma_ref).epsilon(1e-12));
  // d/dp of (p, 1/p) at 2 is (1, −1/4).
  CHECK(continuity_upper_bound(m, c, p, 0, 1) == doctest::Approx(1.0 * c.gamma_ref).epsilon(1e-12));
  CHECK_THROWS_AS(continuity_upper_bound(m, c, p, 0, 4), InvalidInput);
}

TEST_CASE("bracketing against generalized eigenvalues") {
  const auto& m = bench().model;
  const auto& c = constants();
  std::mt19937_64 rng(21);
  Matrix w = Matrix(m.weight);
  for (int s = 0; s < 5; ++s) {
    auto p = random_design(m, rng);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(Matrix(eval_operator(m, p)), w);
    CHECK(coercivity_lower_bound(m, c, p) <= ges.eigenvalues().minCoeff() * (1 + 1e-12));
    CHECK(continuity_upper_bound(m, c, p, MultiIndex(4, 0)) >= ges.eigenvalues().maxCoeff() * (1 - 1e-12));
  }
}

TEST_CASE("residual dual norm") {
  SparseMatrix eye(2, 2);
  eye.setIdentity();
  CHECK(residual_dual_norm(Vector(Eigen::Vector2d(3, 4)), eye) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(residual_dual_norm(Vector::Zero(2), eye) == 0.0);

  const auto& m = bench().model;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  Vector rho(m.dimension());
  for (int i = 0; i < rho.size(); ++i) rho[i] = nd(rng);
  const double dn = residual_dual_norm(rho, m.weight);
  for (int t = 0; t < 100; ++t) {
    Vector v(m.dimension());
    for (int i = 0; i < v.size(); ++i) v[i] = nd(rng);
    CHECK(std::abs(rho.dot(v)) <= dn * wnorm(m.weight, v) * (1 + 1e-12));
  }
  Vector riesz = Eigen::SimplicialLDLT<SparseMatrix>(m.weight).solve(rho);
  CHECK(std::abs(rho.dot(riesz)) == doctest::Approx(dn * wnorm(m.weight, riesz)).epsilon(1e-10));
}

TEST_CASE("bounds vanish at a snapshot parameter with the full basis") {
  const auto& m = bench().model;
  auto idx = design_gradient_indices(m);
  PodBasis b = project_affine(m, compute_pod(training(m, idx), m.weight));
  Certifier cert(m, b, constants());
  std::vector<double> p{10.0, 5.0, 8.0}, phi{90.0};
  CHECK(state_error_bound(cert, p, phi) <= 1e-8);
  for (int i = 0; i < 3; ++i) CHECK(sensitivity_error_bound(cert, p, phi, i) <= 1e-8);
}

TEST_CASE("bounds dominate the true errors") {
  const auto& m = bench().model;
  auto idx = design_gradient_indices(m);
  SnapshotSet s = training(m, idx);
  PodBasis full = project_affine(m, compute_pod(s, m.weight));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u1(10, 20), u2(2, 5), u3(5, 8), uphi(80, 90);
  const std::vector<MultiIndex> wanted{MultiIndex(4, 0), unit_index(4, 0), unit_index(4, 1), unit_index(4, 2),
                                       unit_index(4, 3, 2)};
  std::vector<double> prev_state;
  for (int ell : {3, 12, full.rank}) {
    PodBasis b = truncate_basis(m, full, ell);
    Certifier cert(m, b, constants());
    double worst_state = 0.0;
    for (int t = 0; t < 8; ++t) {
      std::vector<double> p{u1(rng), u2(rng), u3(rng)}, phi{uphi(rng)};
      FullOrderSolver fs(m, p);
      auto fb = fs.solve(phi, wanted);
      ReducedSolver rs(m, b, p);
      auto rb = rs.solve(phi, wanted);
      ErrorBound eb = cert.bounds(p, phi, wanted, rb);
      for (const auto& alpha : wanted) {
        const double err = wnorm(m.weight, fb.at(alpha) - b.lift(rb.at(alpha)));
        CHECK(eb.at(alpha) >= err);
        CHECK(eb.at(alpha) >= eb.residual.at(alpha) / eb.alpha_lb);
      }
      worst_state = std::max(worst_state, eb.at(MultiIndex(4, 0)));

      // The specialized bounds are the general recursion.
      CHECK(general_error_bound(cert, p, phi, MultiIndex(4, 0)) == state_error_bound(cert, p, phi));
      CHECK(general_error_bound(cert, p, phi, unit_index(4, 1)) == sensitivity_error_bound(cert, p, phi, 1));
    }
    prev_state.push_back(worst_state);
  }
  CHECK(prev_state[2] < prev_state[0]);
}

TEST_CASE("residual equals direct full-order residual") {
  const auto& m = bench().model;
  auto idx = design_gradient_indices(m);
  PodBasis b = project_affine(m, compute_pod(training(m, idx), m.weight, 5));
  Certifier cert(m, b, constants());
  std::vector<double> p{14.0, 3.0, 7.0}, phi{82.0};
  ReducedSolver rs(m, b, p);
  auto rb = rs.solve(phi, idx);
  Vector direct = eval_rhs(m, p, phi) - eval_operator(m, p) * b.lift(rb.at(MultiIndex(4, 0)));
  Vector r = cert.residual(m.variables(p, phi), MultiIndex(4, 0), rb);
  CHECK((r - direct).norm() <= 1e-10 * direct.norm());
}
