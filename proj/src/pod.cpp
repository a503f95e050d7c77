// SPDX-License-Identifier: Apache-2.0

#include "certrom/pod.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace certrom {

void SnapshotSet::add(Vector column, SnapshotTag tag, double weight) {
  if (!(weight >= 0.0)) throw InvalidInput("snapshot weight must be nonnegative");
  if (!columns.empty() && column.size() != columns.front().size()) {
    throw InvalidInput("snapshot dimension mismatch");
  }
  columns.push_back(std::move(column));
  weights.push_back(weight);
  tags.push_back(std::move(tag));
}

void SnapshotSet::add_bundle(const SensitivityBundle& bundle, const std::vector<MultiIndex>& indices, double weight) {
  for (const auto& a : indices) add(bundle.at(a), {bundle.p, bundle.phi, a}, weight);
}

PodBasis compute_pod(const SnapshotSet& snapshots, const SparseMatrix& w, int ell) {
  const int n = snapshots.size();
  if (n == 0) throw InvalidInput("POD: empty snapshot set");
  const Eigen::Index dim = snapshots.columns.front().size();
  if (w.rows() != dim || w.cols() != dim) throw InvalidInput("POD: weight matrix does not match snapshot dimension");

  // Extended precision keeps the small eigenvalues accurate relative to
  // themselves, not only to the largest one.
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  LMatrix y(dim, n);
  for (int j = 0; j < n; ++j) {
    y.col(j) = (std::sqrt(snapshots.weights[j]) * snapshots.columns[j]).cast<long double>();
  }
  const Eigen::SparseMatrix<long double> wl = w.cast<long double>();
  LMatrix wy = wl * y;
  LMatrix gram = y.transpose() * wy;
  gram = (0.5L * (gram + gram.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<LMatrix> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("POD: Gram eigensolver failed");
  // Eigen sorts ascending.
  Eigen::Matrix<long double, Eigen::Dynamic, 1> lambda = es.eigenvalues().reverse();
  LMatrix v = es.eigenvectors().rowwise().reverse();

  PodBasis basis;
  basis.weight = w;
  basis.eigenvalues = lambda.cwiseMax(0.0L).cast<double>();
  const double top = basis.eigenvalues[0];
  if (!(top > 0.0)) throw InvalidInput("POD: all snapshots vanish in the W-norm");
  int rank = 0;
  while (rank < n && basis.eigenvalues[rank] > kPodRankTolerance * top) ++rank;
  basis.rank = rank;
  if (ell < 0) ell = rank;
  if (ell == 0 || ell > rank) {
    throw InvalidInput("POD: requested " + std::to_string(ell) + " basis functions but the snapshot rank is " +
                       std::to_string(rank));
  }

  LMatrix psi(dim, ell);
  for (int i = 0; i < ell; ++i) psi.col(i) = y * v.col(i) / std::sqrt(lambda[i]);

  // Two passes of W-Gram-Schmidt remove the rounding drift of the small modes.
  for (int pass = 0; pass < 2; ++pass) {
    LMatrix wpsi = wl * psi;
    for (int i = 0; i < ell; ++i) {
      for (int k = 0; k < i; ++k) {
        long double c = wpsi.col(k).dot(psi.col(i));
        psi.col(i) -= c * psi.col(k);
      }
      wpsi.col(i) = wl * psi.col(i);
      long double nrm = std::sqrt(psi.col(i).dot(wpsi.col(i)));
      if (!(nrm > 0.0L)) throw NumericalError("POD: basis vector collapsed during orthonormalization");
      psi.col(i) /= nrm;
      wpsi.col(i) /= nrm;
    }
  }
  basis.psi = psi.cast<double>();
  return basis;
}

PodBasis project_affine(const AffineModel& model, PodBasis basis) {
  if (basis.psi.rows() != model.dimension()) throw InvalidInput("POD basis does not match the model dimension");
  basis.stiffness.clear();
  basis.load.clear();
  for (const auto& t : model.stiffness.terms) {
    Matrix kpsi = t.component * basis.psi;
    Matrix r = basis.psi.transpose() * kpsi;
    basis.stiffness.push_back(0.5 * (r + r.transpose()));
  }
  for (const auto& t : model.load.terms) basis.load.push_back(basis.psi.transpose() * t.component);
  basis.output = basis.psi.transpose() * model.output;
  return basis;
}

Matrix reduced_operator(const AffineModel& model, const PodBasis& basis, std::span<const double> x,
                        const MultiIndex& alpha) {
  if (!basis.projected()) throw InvalidInput("POD basis has not been projected");
  Matrix k = Matrix::Zero(basis.size(), basis.size());
  for (std::size_t q = 0; q < basis.stiffness.size(); ++q) {
    double th = model.stiffness.terms[q].theta.derivative(x, alpha);
    if (th != 0.0) k += th * basis.stiffness[q];
  }
  return k;
}

Vector reduced_rhs(const AffineModel& model, const PodBasis& basis, std::span<const double> x, const MultiIndex& alpha) {
  if (!basis.projected()) throw InvalidInput("POD basis has not been projected");
  Vector f = Vector::Zero(basis.size());
  for (std::size_t q = 0; q < basis.load.size(); ++q) {
    double th = model.load.terms[q].theta.derivative(x, alpha);
    if (th != 0.0) f += th * basis.load[q];
  }
  return f;
}

ReducedSolver::ReducedSolver(const AffineModel& model, const PodBasis& basis, std::span<const double> p)
    : model_(model), basis_(basis), p_(p.begin(), p.end()) {
  check_parameter(model, p);
  std::vector<double> phi(model.num_uncertain, 0.0);
  auto x = model.variables(p, phi);
  Matrix k = reduced_operator(model, basis, x, MultiIndex(model.num_vars(), 0));
  factor_.compute(k);
  if (factor_.info() != Eigen::Success || !factor_.isPositive() || factor_.vectorD().minCoeff() <= 0.0) {
    throw NumericalError("reduced operator is singular or indefinite; the basis is deficient");
  }
}

void ReducedSolver::ensure(SensitivityBundle& b, const MultiIndex& alpha) {
  if (b.has(alpha)) return;
  if (total_order(alpha) > ThetaFunction::kMaxOrder) throw InvalidInput("reduced sensitivity order too high");
  for (const auto& beta : nonzero_sub_indices(alpha)) ensure(b, subtract(alpha, beta));
  auto x = model_.variables(p_, b.phi);
  Vector rhs = leibniz_rhs<Vector>(
      alpha,
      [&](const MultiIndex& beta, const Vector& c) -> Vector { return reduced_operator(model_, basis_, x, beta) * c; },
      [&](const MultiIndex& a) { return reduced_rhs(model_, basis_, x, a); },
      [&](const MultiIndex& g) -> const Vector& { return b.at(g); });
  b.u.emplace(alpha, factor_.solve(rhs));
  ++solves_;
}

void ReducedSolver::extend(SensitivityBundle& bundle, const std::vector<MultiIndex>& wanted) {
  if (bundle.p != p_) throw InvalidInput("bundle belongs to a different design");
  for (const auto& a : wanted) ensure(bundle, a);
}

SensitivityBundle ReducedSolver::solve(std::span<const double> phi, const std::vector<MultiIndex>& wanted) {
  SensitivityBundle b;
  b.p = p_;
  b.phi.assign(phi.begin(), phi.end());
  ensure(b, MultiIndex(model_.num_vars(), 0));
  for (const auto& a : wanted) ensure(b, a);
  return b;
}

ReducedSolution solve_reduced_state(const AffineModel& model, const PodBasis& basis, std::span<const double> p,
                                    std::span<const double> phi) {
  ReducedSolver solver(model, basis, p);
  MultiIndex zero(model.num_vars(), 0);
  auto b = solver.solve(phi, {});
  Vector c = b.at(zero);
  return {c, basis.lift(c)};
}

ReducedSolution solve_reduced_sensitivity(const AffineModel& model, const PodBasis& basis, std::span<const double> p,
                                          std::span<const double> phi, const SensitivityMap& lower,
                                          const MultiIndex& alpha) {
  if (total_order(alpha) == 0) return solve_reduced_state(model, basis, p, phi);
  check_parameter(model, p);
  auto x = model.variables(p, phi);
  Matrix k = reduced_operator(model, basis, x, MultiIndex(model.num_vars(), 0));
  Vector rhs = leibniz_rhs<Vector>(
      alpha, [&](const MultiIndex& beta, const Vector& c) -> Vector { return reduced_operator(model, basis, x, beta) * c; },
      [&](const MultiIndex& a) { return reduced_rhs(model, basis, x, a); },
      [&](const MultiIndex& g) -> const Vector& {
        auto it = lower.find(g);
        if (it == lower.end()) throw InvalidInput("missing lower-order reduced sensitivity " + to_string(g));
        return it->second;
      });
  Eigen::LDLT<Matrix> ldlt(k);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericalError("reduced operator is singular");
  Vector c = ldlt.solve(rhs);
  return {c, basis.lift(c)};
}

}  // namespace certrom
