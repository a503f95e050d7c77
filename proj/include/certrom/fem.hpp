// SPDX-License-Identifier: Apache-2.0
//
// P1 finite elements on triangular meshes: assembly, Dirichlet elimination,
// sparse SPD solves and generalized eigenvalue utilities.

#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace certrom {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Point = Eigen::Vector2d;

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a precondition (bad mesh, inadmissible parameter, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, no convergence, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;     // subdomain label per triangle, 1-based
  std::vector<bool> boundary;  // Dirichlet marker per node, a subset of the outer boundary
  int num_subdomains = 0;

  [[nodiscard]] int num_nodes() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles.size()); }
  [[nodiscard]] double signed_area(int t) const;
  /// Throws InvalidInput if any invariant is broken.
  void validate() const;
  /// Marks every node on an edge owned by exactly one triangle.
  void mark_outer_boundary();
};

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

/// Numbering of the free (non-Dirichlet) nodes.
class DofMap {
 public:
  explicit DofMap(const Mesh& mesh);
  [[nodiscard]] int num_free() const { return static_cast<int>(free_nodes_.size()); }
  [[nodiscard]] int num_nodes() const { return static_cast<int>(node_to_dof_.size()); }
  /// -1 for Dirichlet nodes.
  [[nodiscard]] int dof(int node) const { return node_to_dof_[node]; }
  [[nodiscard]] const std::vector<int>& free_nodes() const { return free_nodes_; }
  /// Prolongs a free-DOF vector to all nodes (zero on the boundary).
  [[nodiscard]] Vector prolong(const Vector& free) const;

 private:
  std::vector<int> node_to_dof_;
  std::vector<int> free_nodes_;
};

/// ∫_{label q} (coeff ∇w)·∇v over all mesh nodes.
SparseMatrix assemble_subdomain_stiffness(const Mesh& mesh, int q, const Eigen::Matrix2d& coeff);
/// ∫_{label q} w v over all mesh nodes.
SparseMatrix assemble_subdomain_mass(const Mesh& mesh, int q);
/// ∫_{label q} m·∇v, a constant-direction gradient load.
Vector assemble_subdomain_gradient_load(const Mesh& mesh, int q, const Eigen::Vector2d& direction);

struct ReducedSystem {
  SparseMatrix matrix;
  Vector rhs;
};

/// Eliminates the homogeneous Dirichlet nodes, keeping the free-DOF block.
ReducedSystem apply_dirichlet(const SparseMatrix& matrix, const Vector& rhs, const Mesh& mesh);
SparseMatrix restrict_to_free(const SparseMatrix& matrix, const DofMap& dofs);
Vector restrict_to_free(const Vector& v, const DofMap& dofs);

/// Sparse Cholesky factorization of an SPD matrix, reusable across
/// right-hand sides.
class SpdFactorization {
 public:
  SpdFactorization() = default;
  explicit SpdFactorization(const SparseMatrix& matrix);
  [[nodiscard]] Vector solve(const Vector& rhs, double tol = 1e-10) const;
  [[nodiscard]] int dimension() const { return static_cast<int>(matrix_.rows()); }
  [[nodiscard]] const SparseMatrix& matrix() const { return matrix_; }

 private:
  SparseMatrix matrix_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
};

/// Solves Ax = b with relative residual at most tol.
Vector solve_sparse(const SparseMatrix& matrix, const Vector& rhs, double tol = 1e-10);

/// min over x of xᵀAx / xᵀBx for A symmetric and B SPD.
double smallest_generalized_eigenvalue(const SparseMatrix& a, const SparseMatrix& b, double rel_tol = 1e-10);

double max_abs_asymmetry(const SparseMatrix& matrix);

}  // namespace certrom
