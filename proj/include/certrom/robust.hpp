// SPDX-License-Identifier: Apache-2.0
//
// Worst-case analysis over U_k = {φ : ‖D⁻¹(φ − φ̂)‖_k ≤ 1} and the linear
// and quadratic approximations of robust counterparts.

#pragma once

#include <functional>

#include "certrom/sqp.hpp"

namespace certrom {

enum class NormIndex { two, infinity };
std::string to_string(NormIndex k);
NormIndex parse_norm_index(const std::string& s);

struct UncertaintySet {
  Vector nominal;  // φ̂
  Vector scale;    // diagonal of D, positive
  NormIndex k = NormIndex::two;

  [[nodiscard]] int dimension() const { return static_cast<int>(nominal.size()); }
  void validate() const;
  [[nodiscard]] bool contains(const Vector& phi, double tol = 1e-12) const;
};

/// ‖Dv‖_{k*} with k* = k/(k−1): Euclidean for k = 2, 1-norm for k = ∞.
double dual_norm(const Vector& v, const Vector& d, NormIndex k);
/// value + ‖D grad‖_{k*}: the maximum of the linearization over U_k.
double linear_worst_case(double value, const Vector& grad_phi, const UncertaintySet& set);

struct QuadraticWorstCaseModel {
  double value = 0.0;
  Vector grad;  // ∇_φ g
  Matrix hess;  // ∇_φφ g
};

struct TrustRegionSolution {
  Vector delta;
  double lambda = 0.0;
  double value = 0.0;
  bool hard_case = false;
};

/// Global maximizer of value + gradᵀδ + ½δᵀHδ over ‖D⁻¹δ‖₂ ≤ 1; λ is the
/// multiplier in (−H + λD⁻²)δ = grad.
TrustRegionSolution solve_trust_region_subproblem(const QuadraticWorstCaseModel& model, const Vector& d);
/// Largest violation of the four optimality conditions (stationarity,
/// feasibility, complementarity, −H + λD⁻² ⪰ 0) plus negativity of λ.
double trust_region_kkt_error(const QuadraticWorstCaseModel& model, const Vector& d, const TrustRegionSolution& s);

struct GridMaximum {
  double value = 0.0;
  Vector argmax;
  double resolution = 0.0;  // largest distance from a point of U_k to the grid, in φ units
  long points = 0;
};

/// Maximum over a uniform grid of U_k (N_φ ≤ 2). For k = 2 and N_φ = 2 the
/// grid is the square lattice clipped to the ellipse plus equally spaced
/// boundary points, so boundary maxima are resolved as well.
GridMaximum brute_force_worst_case(const std::function<double(const Vector&)>& evaluator, const UncertaintySet& set,
                                   long grid_points);

/// Functions g_0 (objective) .. g_m (inequalities ≤ 0) of x that also
/// depend on φ, expanded at φ̂.
struct UncertainEval {
  Vector value;                           // m+1
  Matrix grad_x;                          // (m+1) × n
  Matrix grad_phi;                        // (m+1) × nφ
  std::vector<Matrix> grad_phi_x;         // per function: nφ × n, ∂x of ∇φ g
  std::vector<Matrix> hess_phi;           // per function: nφ × nφ
  std::vector<std::vector<Matrix>> hess_phi_x;  // per function and x component: ∂x_k ∇φφ g
};

struct UncertainProblem {
  int n = 0;
  int num_ineq = 0;
  int num_uncertain = 0;
  std::vector<bool> phi_dependent;  // m+1 flags; false entries ignore all φ data
  /// phi_order 1: values and ∇φ; 2: also ∇φφ. `gradients` adds the x-derivatives.
  std::function<UncertainEval(const Vector& x, int phi_order, bool gradients)> evaluate;
  std::vector<std::string> ineq_names;
};

/// Nominal problem at φ̂ (φ data ignored).
NlpProblem build_nominal_nlp(const UncertainProblem& base);

/// Linear robust counterpart. k = ∞: slack form with variables
/// (x, ζ_{i,j}) for each φ-dependent function i and component j. k = 2:
/// direct form g + ‖D∇φg‖₂ (not differentiable where ∇φg = 0).
NlpProblem build_linear_robust_nlp(const UncertainProblem& base, const UncertaintySet& set);
/// Number of slack variables appended by the linear k = ∞ form.
int linear_robust_slack_count(const UncertainProblem& base, const UncertaintySet& set);

/// Layout of the MPEC decision vector (x, δ_i, λ_i) over φ-dependent i.
struct MpecLayout {
  int n = 0;
  int nphi = 0;
  std::vector<int> functions;  // φ-dependent function indices
  [[nodiscard]] int size() const { return n + static_cast<int>(functions.size()) * (nphi + 1); }
  [[nodiscard]] int delta_offset(int k) const { return n + k * (nphi + 1); }
  [[nodiscard]] int lambda_offset(int k) const { return delta_offset(k) + nphi; }
};

MpecLayout mpec_layout(const UncertainProblem& base);

/// Quadratic robust counterpart as an MPEC with the complementarity
/// relaxed to λ(1 − ‖D⁻¹δ‖²) ≤ τ. Per φ-dependent inequality: model value
/// ≤ 0, stationarity (equalities), relaxed complementarity, ‖D⁻¹δ‖² ≤ 1,
/// λ ≥ 0, λ ≥ λ_max(DHD).
NlpProblem build_quadratic_robust_mpec(const UncertainProblem& base, const UncertaintySet& set, double tau);

struct MpecOptions {
  std::vector<double> taus{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
  SqpOptions sqp;
};

struct MpecResult {
  OptResult final;                 // last continuation step (x, δ, λ)
  std::vector<OptResult> steps;
  Vector x;                        // design part
  std::vector<Vector> delta;       // per φ-dependent function
  std::vector<double> lambda;
  double complementarity = 0.0;    // max_i |λ_i (1 − ‖D⁻¹δ_i‖²)|
  int total_iterations = 0;
};

/// τ-continuation; the inner variables start from the exact trust-region
/// solutions at x0. A failed step is retried once from the previous
/// solution with a relaxed tolerance.
MpecResult solve_quadratic_robust(const UncertainProblem& base, const UncertaintySet& set, const Vector& x0,
                                  const MpecOptions& opts = {});

}  // namespace certrom
