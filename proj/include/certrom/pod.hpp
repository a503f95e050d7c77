// SPDX-License-Identifier: Apache-2.0
//
// W-weighted POD by the method of snapshots and the Galerkin reduced model
// built from the projected affine components.

#pragma once

#include "certrom/sensitivity.hpp"

namespace certrom {

struct SnapshotTag {
  std::vector<double> p;
  std::vector<double> phi;
  MultiIndex alpha;  // zero for a state snapshot
};

struct SnapshotSet {
  std::vector<Vector> columns;
  std::vector<double> weights;
  std::vector<SnapshotTag> tags;

  void add(Vector column, SnapshotTag tag, double weight = 1.0);
  /// Adds u_α from the bundle for each α in `indices`.
  void add_bundle(const SensitivityBundle& bundle, const std::vector<MultiIndex>& indices, double weight = 1.0);
  [[nodiscard]] int size() const { return static_cast<int>(columns.size()); }
};

/// Eigenvalues below this fraction of the largest count as zero.
inline constexpr double kPodRankTolerance = 1e-12;

struct PodBasis {
  Matrix psi;          // N × ℓ, W-orthonormal columns
  Vector eigenvalues;  // full spectrum of the weighted Gram matrix, descending
  int rank = 0;        // numerical rank of the snapshot set
  SparseMatrix weight;

  // Filled by project_affine.
  std::vector<Matrix> stiffness;  // ψᵀK_qψ
  std::vector<Vector> load;       // ψᵀf_q
  Vector output;                  // ψᵀ𝔼

  [[nodiscard]] int size() const { return static_cast<int>(psi.cols()); }
  [[nodiscard]] bool projected() const { return !stiffness.empty(); }
  /// u^ℓ = Σ_i c_i ψ_i
  [[nodiscard]] Vector lift(const Vector& coeffs) const { return psi * coeffs; }
};

/// ell < 0 selects the numerical rank. Throws InvalidInput for an empty set
/// or when ell exceeds the rank (the message reports the rank).
PodBasis compute_pod(const SnapshotSet& snapshots, const SparseMatrix& w, int ell = -1);

/// Stores the reduced affine components; only needs to happen once per basis.
PodBasis project_affine(const AffineModel& model, PodBasis basis);

/// Σ_q Θ_q(p) ψᵀK_qψ assembled from the stored components.
Matrix reduced_operator(const AffineModel& model, const PodBasis& basis, std::span<const double> x,
                        const MultiIndex& alpha);
Vector reduced_rhs(const AffineModel& model, const PodBasis& basis, std::span<const double> x, const MultiIndex& alpha);

struct ReducedSolution {
  Vector coeffs;
  Vector lifted;
};

ReducedSolution solve_reduced_state(const AffineModel& model, const PodBasis& basis, std::span<const double> p,
                                    std::span<const double> phi);
/// `lower` holds reduced coefficients of every index below α.
ReducedSolution solve_reduced_sensitivity(const AffineModel& model, const PodBasis& basis, std::span<const double> p,
                                          std::span<const double> phi, const SensitivityMap& lower,
                                          const MultiIndex& alpha);

/// Reduced counterpart of FullOrderSolver: one ℓ×ℓ factorization per p,
/// bundle entries are reduced coefficient vectors (not lifted).
class ReducedSolver {
 public:
  ReducedSolver(const AffineModel& model, const PodBasis& basis, std::span<const double> p);

  SensitivityBundle solve(std::span<const double> phi, const std::vector<MultiIndex>& wanted);
  /// Adds missing indices to a bundle produced by this solver.
  void extend(SensitivityBundle& bundle, const std::vector<MultiIndex>& wanted);
  [[nodiscard]] long solves() const { return solves_; }

 private:
  void ensure(SensitivityBundle& b, const MultiIndex& alpha);

  const AffineModel& model_;
  const PodBasis& basis_;
  std::vector<double> p_;
  Eigen::LDLT<Matrix> factor_;
  long solves_ = 0;
};

}  // namespace certrom
