// SPDX-License-Identifier: Apache-2.0
//
// SQP with damped BFGS, ℓ1 merit function and Armijo backtracking for
//   min f(x)  s.t.  g(x) ≤ 0,  h(x) = 0.

#pragma once

#include <functional>
#include <string>

#include "certrom/qp.hpp"

namespace certrom {

struct NlpEval {
  double f = 0.0;
  Vector g;       // inequalities, g ≤ 0
  Vector h;       // equalities
  Vector grad;    // filled when gradients are requested
  Matrix jac_g;   // rows = constraints
  Matrix jac_h;
};

struct NlpProblem {
  int n = 0;
  int num_ineq = 0;
  int num_eq = 0;
  /// Evaluates at x; gradients only when `gradients` is true. May throw
  /// InvalidInput for points where the model is undefined (treated as a
  /// rejected trial step during the line search).
  std::function<NlpEval(const Vector& x, bool gradients)> evaluate;
  std::vector<std::string> ineq_names;
  std::vector<std::string> eq_names;
};

struct SqpOptions {
  int max_iter = 200;
  double kkt_tol = 1e-8;
  double armijo_initial = 1.0;
  double armijo_factor = 0.5;
  double armijo_slope = 1e-4;
  int armijo_max_backtracks = 30;
  double penalty_initial = 1.0;
  double penalty_margin = 1.1;   // μ ≥ margin·‖λ‖∞ + offset
  double penalty_offset = 1.0;
  double bfgs_damping = 0.2;
  double bfgs_min_eig = 1e-8;
  double bfgs_max_eig = 1e8;
  double elastic_weight = 1e4;
  bool second_order_correction = true;
  /// After an accepted step, also try the minimizer of the quadratic
  /// interpolating the merit function along d (one extra evaluation). On a
  /// quadratic this is an exact line search, so BFGS terminates finitely.
  bool line_search_interpolation = false;
};

enum class SqpStatus { converged, max_iterations, line_search_failed, qp_failed };
std::string to_string(SqpStatus s);

struct SqpIteration {
  int iter = 0;
  double objective = 0.0;
  double violation = 0.0;
  double kkt = 0.0;
  double step = 0.0;
  int evaluations = 0;
};

struct OptResult {
  Vector x;
  double objective = 0.0;
  double violation = 0.0;  // ∞-norm of positive parts / equality residuals
  double kkt = 0.0;
  int iterations = 0;
  int evaluations = 0;
  SqpStatus status = SqpStatus::max_iterations;
  Vector lambda_ineq;
  Vector lambda_eq;
  std::vector<SqpIteration> history;

  [[nodiscard]] bool converged() const { return status == SqpStatus::converged; }
};

/// KKT residual max(‖∇L‖∞, violation, max|λ_i g_i|, max(-λ_i)).
double kkt_residual(const NlpEval& ev, const Vector& lambda_ineq, const Vector& lambda_eq);
double constraint_violation(const NlpEval& ev);

OptResult solve_sqp(const NlpProblem& problem, const Vector& x0, const SqpOptions& opts = {});

}  // namespace certrom
