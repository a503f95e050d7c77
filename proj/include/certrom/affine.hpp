// SPDX-License-Identifier: Apache-2.0
//
// Affinely decomposed parametric problems
//   K(p) = Σ_q Θ_q(p) K_q,   f(p, φ) = Σ_q Θ_f,q(p, φ) f_q
// with exact derivatives of the coefficient functions.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "certrom/dual.hpp"
#include "certrom/fem.hpp"

namespace certrom {

/// Counts of derivatives per variable; variables are ordered (p_1..p_Np, φ_1..φ_Nφ).
using MultiIndex = std::vector<int>;

int total_order(const MultiIndex& alpha);
/// e.g. {1,0,2} -> {0,2,2}.
std::vector<int> to_directions(const MultiIndex& alpha);
MultiIndex unit_index(int num_vars, int var, int order = 1);
/// All β with 0 ≤ β ≤ α componentwise, β ≠ 0.
std::vector<MultiIndex> nonzero_sub_indices(const MultiIndex& alpha);
/// Π_i C(α_i, β_i).
double multi_binomial(const MultiIndex& alpha, const MultiIndex& beta);
MultiIndex subtract(const MultiIndex& alpha, const MultiIndex& beta);
std::string to_string(const MultiIndex& alpha);

/// Coefficient function with exact partial derivatives up to total order 3.
class ThetaFunction {
 public:
  static constexpr int kMaxOrder = 3;

  ThetaFunction() = default;

  /// `expr` must be a generic callable `T(std::span<const T>)` valid for
  /// double and the nested dual types.
  template <class F>
  static ThetaFunction make(std::string descriptor, F expr) {
    ThetaFunction th;
    th.descriptor_ = std::move(descriptor);
    th.f0_ = [expr](std::span<const double> x) { return expr(x); };
    th.f1_ = [expr](std::span<const D1> x) { return expr(x); };
    th.f2_ = [expr](std::span<const D2> x) { return expr(x); };
    th.f3_ = [expr](std::span<const D3> x) { return expr(x); };
    return th;
  }

  static ThetaFunction constant(double value);

  [[nodiscard]] double value(std::span<const double> x) const { return f0_(x); }
  /// ∂^α Θ(x); throws for total order above kMaxOrder.
  [[nodiscard]] double derivative(std::span<const double> x, const MultiIndex& alpha) const;
  [[nodiscard]] const std::string& descriptor() const { return descriptor_; }

 private:
  template <class T>
  double eval_seeded(const std::function<T(std::span<const T>)>& f, std::span<const double> x,
                     std::span<const int> dirs) const;

  std::string descriptor_;
  std::function<double(std::span<const double>)> f0_;
  std::function<D1(std::span<const D1>)> f1_;
  std::function<D2(std::span<const D2>)> f2_;
  std::function<D3(std::span<const D3>)> f3_;
};

/// Groups stiffness terms whose Θ's form the entries of a symmetric
/// coefficient tensor acting on a PSD-monotone component family (a
/// subdomain diffusion tensor). A scalar term with PSD component is a 1×1
/// block. The coercivity/continuity bounds compare C(p) with C(p̄).
struct CoefficientBlock {
  /// 1: {term}; 2: {xx, xy, yy}.
  int dim = 1;
  std::vector<int> terms;
};

struct AffineTerm {
  ThetaFunction theta;
  SparseMatrix component;
};

class AffineOperator {
 public:
  std::vector<AffineTerm> terms;
  std::vector<CoefficientBlock> blocks;

  [[nodiscard]] int dimension() const;
  [[nodiscard]] SparseMatrix evaluate(std::span<const double> x) const;
  /// Σ_q ∂^α Θ_q(x) K_q.
  [[nodiscard]] SparseMatrix derivative(std::span<const double> x, const MultiIndex& alpha) const;
  /// (∂^α K)(x) v without forming the summed matrix.
  [[nodiscard]] Vector apply(std::span<const double> x, const MultiIndex& alpha, const Vector& v) const;
  /// Coefficient tensor of a block at x, differentiated by alpha (alpha may be zero).
  [[nodiscard]] Eigen::MatrixXd block_tensor(int block, std::span<const double> x, const MultiIndex& alpha) const;
};

struct AffineVectorTerm {
  ThetaFunction theta;
  Vector component;
};

class AffineFunctional {
 public:
  std::vector<AffineVectorTerm> terms;

  [[nodiscard]] Vector evaluate(std::span<const double> x) const;
  [[nodiscard]] Vector derivative(std::span<const double> x, const MultiIndex& alpha) const;
};

struct LinearBound {
  std::vector<double> coeffs;  // over design parameters
  double rhs = 0.0;            // coeffs·p ≤ rhs
  std::string name;
};

struct AffineModel {
  AffineOperator stiffness;
  AffineFunctional load;
  SparseMatrix mass;  // at p̄
  SparseMatrix weight;  // W = K(p̄) + M(p̄)
  Vector output;        // E₀ = outputᵀu
  int num_design = 0;
  int num_uncertain = 0;
  std::vector<double> reference;  // p̄
  std::vector<double> lower;      // admissible box
  std::vector<double> upper;
  std::vector<LinearBound> linear_bounds;
  std::vector<std::string> design_names;
  std::vector<std::string> uncertain_names;

  [[nodiscard]] int num_vars() const { return num_design + num_uncertain; }
  [[nodiscard]] int dimension() const { return stiffness.dimension(); }
  /// Concatenates (p, φ) into the variable vector used by Θ.
  [[nodiscard]] std::vector<double> variables(std::span<const double> p, std::span<const double> phi) const;
  /// Throws InvalidInput naming every violated bound.
  void check_admissible(std::span<const double> p) const;
  [[nodiscard]] bool is_admissible(std::span<const double> p) const;
};

/// Admissibility plus positive definiteness of every coefficient block.
void check_parameter(const AffineModel& model, std::span<const double> p);
/// K(p); p must be admissible and every block tensor positive definite.
SparseMatrix eval_operator(const AffineModel& model, std::span<const double> p);
/// Σ_q (∂^order Θ_q / ∂p_i^order)(p) K_q, order 1 or 2.
SparseMatrix eval_operator_derivative(const AffineModel& model, std::span<const double> p, int i, int order);
Vector eval_rhs(const AffineModel& model, std::span<const double> p, std::span<const double> phi);
/// Derivative of the load with respect to variable `var` (index into (p, φ)).
Vector eval_rhs_derivative(const AffineModel& model, std::span<const double> p, std::span<const double> phi, int var,
                           int order);

/// Sparse-triplet text export of Θ descriptors and components.
void write_model(std::ostream& os, const AffineModel& model);

}  // namespace certrom
