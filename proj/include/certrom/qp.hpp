// SPDX-License-Identifier: Apache-2.0
//
// Dense strictly convex QP
//   min ½xᵀHx + cᵀx   s.t.  A_eq x = b_eq,  A x ≤ b
// by the Goldfarb-Idnani dual active-set method.

#pragma once

#include "certrom/fem.hpp"

namespace certrom {

struct QpProblem {
  Matrix h;
  Vector c;
  Matrix a_eq;  // rows are constraints; may have zero rows
  Vector b_eq;
  Matrix a;
  Vector b;
};

struct QpResult {
  Vector x;
  Vector lambda_eq;  // Hx + c + A_eqᵀλ_eq + Aᵀλ = 0
  Vector lambda;     // ≥ 0
  double objective = 0.0;
  int iterations = 0;
  std::vector<int> active;  // active inequality rows
};

/// Raised when the constraints admit no solution; callers may relax.
class QpInfeasible : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Throws InvalidInput for inconsistent sizes or H not positive definite,
/// QpInfeasible for an empty feasible set or dependent equalities.
QpResult solve_qp(const QpProblem& qp);

/// max(primal violation, dual residual, complementarity) of a candidate.
double qp_kkt_error(const QpProblem& qp, const QpResult& r);

}  // namespace certrom
