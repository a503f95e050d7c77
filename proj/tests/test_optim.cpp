// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "certrom/sqp.hpp"
#include "oracles.hpp"

using namespace certrom;

namespace {

QpProblem unconstrained(const Matrix& h, const Vector& c) {
  QpProblem qp;
  qp.h = h;
  qp.c = c;
  qp.a_eq = Matrix(0, h.rows());
  qp.b_eq = Vector(0);
  qp.a = Matrix(0, h.rows());
  qp.b = Vector(0);
  return qp;
}

}  // namespace

TEST_CASE("qp without constraints") {
  Matrix h{{4, 1}, {1, 3}};
  Vector c(2);
  c << 1, -2;
  QpResult r = solve_qp(unconstrained(h, c));
  CHECK((r.x + h.ldlt().solve(c)).norm() < 1e-14);
  CHECK(r.active.empty());
}

TEST_CASE("qp with one active constraint is a projection") {
  // min ½‖x − y‖² s.t. aᵀx ≤ b with y outside: x = y − (aᵀy − b)/‖a‖² a.
  QpProblem qp = unconstrained(Matrix::Identity(3, 3), -Vector(Eigen::Vector3d(2, 1, 3)));
  qp.a = Matrix(1, 3);
  qp.a << 1, 1, 1;
  qp.b = Vector::Constant(1, 3.0);
  QpResult r = solve_qp(qp);
  Eigen::Vector3d y(2, 1, 3), a(1, 1, 1);
  Eigen::Vector3d expect = y - (a.dot(y) - 3.0) / 3.0 * a;
  CHECK((r.x - expect).norm() < 1e-14);
  CHECK(r.lambda[0] == doctest::Approx(1.0));
  CHECK(qp_kkt_error(qp, r) <= 1e-10);
}

TEST_CASE("random qps against active-set enumeration") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 40; ++t) {
    const int n = 2 + t % 9;
    const int m = 1 + (t * 7) % 10;
    const int meq = t % 3 == 0 ? 1 : 0;
    QpProblem qp = oracle::random_qp(n, m, meq, rng);
    QpResult r = solve_qp(qp);
    Vector ref = oracle::qp_by_enumeration(qp);
    REQUIRE(ref.size() == n);
    CHECK((r.x - ref).norm() <= 1e-9 * std::max(1.0, ref.norm()));
    CHECK(qp_kkt_error(qp, r) <= 1e-10);
    CHECK((r.lambda.size() == 0 || r.lambda.minCoeff() >= 0.0));
  }
}

TEST_CASE("qp errors") {
  QpProblem qp = unconstrained(Matrix::Identity(1, 1), Vector::Zero(1));
  qp.a = Matrix(2, 1);
  qp.a << 1, -1;
  qp.b = Vector(2);
  qp.b << -1, -1;  // x ≤ −1 and x ≥ 1
  CHECK_THROWS_AS(solve_qp(qp), QpInfeasible);
  QpProblem indefinite = unconstrained(Matrix{{1, 0}, {0, -1}}, Vector::Zero(2));
  CHECK_THROWS_AS(solve_qp(indefinite), InvalidInput);
  QpProblem sizes = unconstrained(Matrix::Identity(2, 2), Vector::Zero(3));
  CHECK_THROWS_AS(solve_qp(sizes), InvalidInput);
}

TEST_CASE("sqp on an active bound") {
  NlpProblem p;
  p.n = 1;
  p.num_ineq = 1;
  p.evaluate = [](const Vector& x, bool grad) {
    NlpEval e;
    e.f = x[0] * x[0];
    e.g = Vector::Constant(1, 1.0 - x[0]);
    e.h = Vector(0);
    if (grad) {
      e.grad = Vector::Constant(1, 2 * x[0]);
      e.jac_g = Matrix::Constant(1, 1, -1.0);
      e.jac_h = Matrix(0, 1);
    }
    return e;
  };
  OptResult r = solve_sqp(p, Vector::Constant(1, 3.0));
  CHECK(r.converged());
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.lambda_ineq[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("sqp on convex qps matches the KKT solution") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    QpProblem qp = oracle::random_qp(2 + t % 5, 3 + t % 4, t % 2, rng);
    Vector ref = oracle::qp_by_enumeration(qp);
    OptResult r = solve_sqp(oracle::as_nlp(qp), Vector::Zero(qp.h.rows()));
    CHECK(r.converged());
    CHECK((r.x - ref).norm() <= 1e-8);
    // Stored residuals agree with a fresh evaluation.
    NlpEval e = oracle::as_nlp(qp).evaluate(r.x, true);
    CHECK(constraint_violation(e) == doctest::Approx(r.violation).epsilon(1e-12));
    CHECK(kkt_residual(e, r.lambda_ineq, r.lambda_eq) == doctest::Approx(r.kkt).epsilon(1e-12));
  }
}

TEST_CASE("sqp on an unconstrained quadratic") {
  std::mt19937_64 rng(5);
  for (int n : {2, 4, 6}) {
    QpProblem qp = oracle::random_qp(n, 0, 0, rng);
    const Vector xstar = -qp.h.ldlt().solve(qp.c);
    OptResult plain = solve_sqp(oracle::as_nlp(qp), Vector::Constant(n, 3.0), {.kkt_tol = 1e-10});
    CHECK(plain.converged());
    CHECK((plain.x - xstar).norm() <= 1e-8);
    // Exact steps along d make BFGS terminate within n + 1 updates.
    SqpOptions exact{.kkt_tol = 1e-10};
    exact.line_search_interpolation = true;
    OptResult r = solve_sqp(oracle::as_nlp(qp), Vector::Constant(n, 3.0), exact);
    MESSAGE("n = " << n << ": " << plain.iterations << " iterations with unit steps, " << r.iterations
                   << " with interpolated steps");
    CHECK(r.converged());
    CHECK(r.kkt <= 1e-10);
    CHECK((r.x - xstar).norm() <= 1e-8);
    CHECK(r.iterations <= n + 2);
  }
}

TEST_CASE("sqp on a nonlinear problem with an equality") {
  // min (x−2)⁴ + (x − 2y)² s.t. x² − y = 0: a small classic with a known optimum.
  NlpProblem p;
  p.n = 2;
  p.num_eq = 1;
  p.evaluate = [](const Vector& v, bool grad) {
    const double x = v[0], y = v[1];
    NlpEval e;
    e.f = std::pow(x - 2, 4) + std::pow(x - 2 * y, 2);
    e.g = Vector(0);
    e.h = Vector::Constant(1, x * x - y);
    if (grad) {
      e.grad = Vector(2);
      e.grad << 4 * std::pow(x - 2, 3) + 2 * (x - 2 * y), -4 * (x - 2 * y);
      e.jac_g = Matrix(0, 2);
      e.jac_h = Matrix(1, 2);
      e.jac_h << 2 * x, -1;
    }
    return e;
  };
  OptResult r = solve_sqp(p, Vector(Eigen::Vector2d(2, 1)));
  CHECK(r.converged());
  CHECK(std::abs(r.x[0] * r.x[0] - r.x[1]) <= 1e-8);
  // Reference from a fine scan along the constraint x ↦ (x, x²).
  double best = 1e300, xb = 0;
  for (int i = 0; i <= 200000; ++i) {
    const double x = 0.5 + 1.5 * i / 200000.0;
    const double f = std::pow(x - 2, 4) + std::pow(x - 2 * x * x, 2);
    if (f < best) best = f, xb = x;
  }
  CHECK(r.objective <= best + 1e-9);
  CHECK(r.x[0] == doctest::Approx(xb).epsilon(1e-4));
}

TEST_CASE("sqp rejects trial points where the model is undefined") {
  // log barrier-like objective only defined for x > 0.
  NlpProblem p;
  p.n = 1;
  p.evaluate = [](const Vector& x, bool grad) {
    if (x[0] <= 0) throw InvalidInput("undefined");
    NlpEval e;
    e.f = x[0] - std::log(x[0]);
    e.g = Vector(0);
    e.h = Vector(0);
    if (grad) {
      e.grad = Vector::Constant(1, 1 - 1 / x[0]);
      e.jac_g = Matrix(0, 1);
      e.jac_h = Matrix(0, 1);
    }
    return e;
  };
  OptResult r = solve_sqp(p, Vector::Constant(1, 0.05));
  CHECK(r.converged());
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}
