// SPDX-License-Identifier: Apache-2.0
//
// Independent reference solutions used by the tests.

#pragma once

#include <random>

#include "certrom/qp.hpp"
#include "certrom/sqp.hpp"

namespace certrom::oracle {

/// Strictly convex QP by trying every active set and keeping the one whose
/// KKT point is primal feasible with nonnegative multipliers.
inline Vector qp_by_enumeration(const QpProblem& qp) {
  const int n = static_cast<int>(qp.h.rows());
  const int me = static_cast<int>(qp.a_eq.rows());
  const int m = static_cast<int>(qp.a.rows());
  double best_obj = std::numeric_limits<double>::infinity();
  Vector best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int k = me + static_cast<int>(act.size());
    if (k > n) continue;
    Matrix kkt = Matrix::Zero(n + k, n + k);
    Vector rhs = Vector::Zero(n + k);
    kkt.topLeftCorner(n, n) = qp.h;
    rhs.head(n) = -qp.c;
    for (int r = 0; r < me; ++r) {
      kkt.block(n + r, 0, 1, n) = qp.a_eq.row(r);
      kkt.block(0, n + r, n, 1) = qp.a_eq.row(r).transpose();
      rhs[n + r] = qp.b_eq[r];
    }
    for (int j = 0; j < static_cast<int>(act.size()); ++j) {
      kkt.block(n + me + j, 0, 1, n) = qp.a.row(act[j]);
      kkt.block(0, n + me + j, n, 1) = qp.a.row(act[j]).transpose();
      rhs[n + me + j] = qp.b[act[j]];
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (lu.rank() < n + k) continue;
    Vector sol = lu.solve(rhs);
    Vector x = sol.head(n);
    bool ok = true;
    for (int j = 0; j < static_cast<int>(act.size()); ++j) ok = ok && sol[n + me + j] >= -1e-12;
    if (m > 0) ok = ok && ((qp.a * x - qp.b).maxCoeff() <= 1e-10);
    if (!ok) continue;
    const double obj = 0.5 * x.dot(qp.h * x) + qp.c.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

/// Random strictly convex QP of size n with m inequalities, feasible at a
/// random interior point.
inline QpProblem random_qp(int n, int m, int meq, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  auto gauss = [&](int r, int c) {
    Matrix a(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) a(i, j) = nd(rng);
    return a;
  };
  QpProblem qp;
  Matrix g = gauss(n, n);
  qp.h = g * g.transpose() + 0.5 * Matrix::Identity(n, n);
  qp.c = gauss(n, 1).col(0) * 3.0;
  Vector x0 = gauss(n, 1).col(0);
  qp.a_eq = gauss(meq, n);
  qp.b_eq = qp.a_eq * x0;
  qp.a = gauss(m, n);
  Vector slack(m);
  for (int i = 0; i < m; ++i) slack[i] = std::abs(nd(rng)) + 0.1;
  qp.b = qp.a * x0 + slack;
  return qp;
}

/// The QP written as an NLP for solve_sqp.
inline NlpProblem as_nlp(const QpProblem& qp) {
  NlpProblem p;
  p.n = static_cast<int>(qp.h.rows());
  p.num_ineq = static_cast<int>(qp.a.rows());
  p.num_eq = static_cast<int>(qp.a_eq.rows());
  p.evaluate = [qp](const Vector& x, bool grad) {
    NlpEval e;
    e.f = 0.5 * x.dot(qp.h * x) + qp.c.dot(x);
    e.g = qp.a * x - qp.b;
    e.h = qp.a_eq * x - qp.b_eq;
    if (grad) {
      e.grad = qp.h * x + qp.c;
      e.jac_g = qp.a;
      e.jac_h = qp.a_eq;
    }
    return e;
  };
  return p;
}

}  // namespace certrom::oracle
