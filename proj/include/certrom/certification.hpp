// SPDX-License-Identifier: Apache-2.0
//
// A-posteriori error bounds in the W-norm for reduced states and
// sensitivities. Coercivity/continuity use the min/max-Θ argument applied
// per coefficient block: for a block with tensor C(p),
//   λ_min(C(p), C(p̄)) ≤ a(v,v;p)/a(v,v;p̄) contributions ≤ λ_max(C(p), C(p̄)).

#pragma once

#include "certrom/pod.hpp"

namespace certrom {

struct StabilityConstants {
  double alpha_ref = 0.0;  // λ_min(K(p̄), W)
  double gamma_ref = 1.0;  // ≥ λ_max(K(p̄), W); 1 because W = K(p̄) + M
};

StabilityConstants compute_stability_constants(const AffineModel& model);

/// min over blocks of λ_min(C(p), C(p̄)), times α_ref.
double coercivity_lower_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p);
/// Zero α: max over blocks of λ_max(C(p), C(p̄)) times γ_ref. Otherwise a
/// bound on the continuity constant of ∂^α a: max over blocks of the
/// spectral radius of ∂^α C relative to C(p̄), times γ_ref. α may include φ
/// entries (the operator does not depend on φ, so those give 0).
double continuity_upper_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p,
                              const MultiIndex& alpha);
/// Order-k derivative along design parameter i.
double continuity_upper_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p, int i,
                              int k);

/// √(ρᵀW⁻¹ρ).
double residual_dual_norm(const Vector& residual, const SparseMatrix& w);
double residual_dual_norm(const Vector& residual, const SpdFactorization& w);

struct ErrorBound {
  std::vector<double> p;
  std::vector<double> phi;
  double alpha_lb = 0.0;
  std::map<MultiIndex, double> residual;  // ‖r_α‖ in the dual W-norm
  std::map<MultiIndex, double> delta;     // Δ_α

  [[nodiscard]] double at(const MultiIndex& alpha) const;
};

/// Caches the W factorization and stability constants for one basis.
class Certifier {
 public:
  Certifier(const AffineModel& model, const PodBasis& basis);
  Certifier(const AffineModel& model, const PodBasis& basis, StabilityConstants constants);

  /// Residual r_α = ∂^α f − Σ_{0≤β≤α} C(α,β) ∂^β K u^ℓ_{α−β} for lifted reduced solutions.
  [[nodiscard]] Vector residual(std::span<const double> x, const MultiIndex& alpha,
                                const SensitivityBundle& reduced) const;
  /// Δ_α = (‖r_α‖ + Σ_{0<β≤α} C(α,β) γ_β Δ_{α−β}) / α_LB for α in `wanted`
  /// and everything below. `reduced` holds reduced coefficients.
  [[nodiscard]] ErrorBound bounds(std::span<const double> p, std::span<const double> phi,
                                  const std::vector<MultiIndex>& wanted, const SensitivityBundle& reduced) const;
  /// Convenience: runs the reduced solves itself.
  [[nodiscard]] ErrorBound bounds(std::span<const double> p, std::span<const double> phi,
                                  const std::vector<MultiIndex>& wanted) const;

  [[nodiscard]] const StabilityConstants& constants() const { return constants_; }

 private:
  const AffineModel& model_;
  const PodBasis& basis_;
  StabilityConstants constants_;
  SpdFactorization w_factor_;
};

double state_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi);
/// First sensitivity along design parameter i.
double sensitivity_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi, int i);
/// Bound of any order through the binomial recursion.
double general_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi,
                           const MultiIndex& alpha);

}  // namespace certrom
