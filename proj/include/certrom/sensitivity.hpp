// SPDX-License-Identifier: Apache-2.0
//
// Full-order state and sensitivity solves. For a multi-index α over the
// variables (p, φ) the sensitivity u_α = ∂^α u solves
//   K(p) u_α = ∂^α f − Σ_{0<β≤α} C(α,β) ∂^β K u_{α−β}.

#pragma once

#include <map>
#include <optional>

#include "certrom/affine.hpp"

namespace certrom {

/// Sensitivities keyed by multi-index; the zero index is the state.
using SensitivityMap = std::map<MultiIndex, Vector>;

struct SensitivityBundle {
  std::vector<double> p;
  std::vector<double> phi;
  SensitivityMap u;

  [[nodiscard]] bool has(const MultiIndex& alpha) const { return u.count(alpha) != 0; }
  /// Throws InvalidInput naming the missing index.
  [[nodiscard]] const Vector& at(const MultiIndex& alpha) const;
};

/// Leibniz right-hand side ∂^α f − Σ_{0<β≤α} C(α,β) ∂^β K u_{α−β} given
/// accessors for the operator derivatives and lower-order solutions.
template <class Vec, class Dk, class Df, class Lower>
Vec leibniz_rhs(const MultiIndex& alpha, Dk&& apply_dk, Df&& df, Lower&& lower) {
  Vec rhs = df(alpha);
  for (const auto& beta : nonzero_sub_indices(alpha)) {
    double c = multi_binomial(alpha, beta);
    rhs -= c * apply_dk(beta, lower(subtract(alpha, beta)));
  }
  return rhs;
}

Vector solve_state(const AffineModel& model, std::span<const double> p, std::span<const double> phi,
                   double tol = 1e-10);

/// One sensitivity solve; `lower` must contain every u_γ with γ < α.
/// A zero α degenerates to the state solve.
Vector solve_sensitivity(const AffineModel& model, std::span<const double> p, std::span<const double> phi,
                         const SensitivityMap& lower, const MultiIndex& alpha, double tol = 1e-10);

/// Factorizes K(p) once and solves the state and any requested
/// sensitivities, filling in lower orders as needed. Every linear solve
/// is counted.
class FullOrderSolver {
 public:
  FullOrderSolver(const AffineModel& model, std::span<const double> p, double tol = 1e-10);

  /// Returns the bundle at φ containing `wanted` and all indices below them.
  SensitivityBundle solve(std::span<const double> phi, const std::vector<MultiIndex>& wanted);
  /// Adds missing indices to a bundle produced by this solver.
  void extend(SensitivityBundle& bundle, const std::vector<MultiIndex>& wanted);
  [[nodiscard]] long solves() const { return solves_; }

 private:
  void ensure(SensitivityBundle& b, const MultiIndex& alpha);

  const AffineModel& model_;
  std::vector<double> p_;
  double tol_;
  SpdFactorization factor_;
  long solves_ = 0;
};

/// Index sets used throughout: the state, first p-derivatives, and the
/// φ-derivatives (with their p-gradients) needed by the robust models.
std::vector<MultiIndex> design_gradient_indices(const AffineModel& model);
/// `phi_order` 0, 1 or 2: adds ∂_φ^k and ∂_p∂_φ^k for k ≤ phi_order (N_φ = 1 for k = 2 mixed terms
/// is not assumed; all pairs φ_jφ_k are included).
std::vector<MultiIndex> robust_indices(const AffineModel& model, int phi_order);

struct OutputDerivatives {
  double e0 = 0.0;
  Vector dp;         // ∂E₀/∂p
  Vector dphi;       // ∂E₀/∂φ (empty when not in bundle)
  Matrix dphiphi;    // ∂²E₀/∂φ² (empty when not in bundle)
};

/// E₀ = 𝔼ᵀu and 𝔼ᵀu_α for the available orders; throws if the state or
/// first p-sensitivities are missing.
OutputDerivatives output_and_gradients(const AffineModel& model, const SensitivityBundle& bundle);
/// Same with an arbitrary functional in place of 𝔼 (e.g. its reduced image).
OutputDerivatives output_and_gradients(const AffineModel& model, const SensitivityBundle& bundle,
                                       const Vector& functional);
/// 𝔼ᵀu_α for any α in the bundle.
double output_derivative(const AffineModel& model, const SensitivityBundle& bundle, const MultiIndex& alpha);

}  // namespace certrom
