// SPDX-License-Identifier: Apache-2.0

#include "certrom/certification.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace certrom {

StabilityConstants compute_stability_constants(const AffineModel& model) {
  StabilityConstants c;
  SparseMatrix k = eval_operator(model, model.reference);
  c.alpha_ref = smallest_generalized_eigenvalue(k, model.weight, 1e-12);
  if (!(c.alpha_ref > 0.0)) throw NumericalError("reference operator is not coercive in the W-norm");
  return c;
}

namespace {

std::vector<double> reference_vars(const AffineModel& model) {
  std::vector<double> phi(model.num_uncertain, 0.0);
  return model.variables(model.reference, phi);
}

// Eigenvalues of C relative to C_ref (C_ref SPD), ascending.
Vector relative_eigenvalues(const Eigen::MatrixXd& c, const Eigen::MatrixXd& c_ref) {
  if (c.rows() == 1) return Vector::Constant(1, c(0, 0) / c_ref(0, 0));
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(c, c_ref, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("block eigenvalue computation failed");
  return es.eigenvalues();
}

}  // namespace

double coercivity_lower_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p) {
  check_parameter(model, p);
  std::vector<double> phi(model.num_uncertain, 0.0);
  auto x = model.variables(p, phi);
  auto xr = reference_vars(model);
  MultiIndex zero(model.num_vars(), 0);
  double lb = std::numeric_limits<double>::infinity();
  for (int b = 0; b < static_cast<int>(model.stiffness.blocks.size()); ++b) {
    Vector ev = relative_eigenvalues(model.stiffness.block_tensor(b, x, zero), model.stiffness.block_tensor(b, xr, zero));
    lb = std::min(lb, ev.minCoeff());
  }
  if (!(lb > 0.0)) throw InvalidInput("min-theta bound is not positive at this parameter");
  return lb * c.alpha_ref;
}

double continuity_upper_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p,
                              const MultiIndex& alpha) {
  check_parameter(model, p);
  if (static_cast<int>(alpha.size()) != model.num_vars()) throw InvalidInput("multi-index has wrong length");
  if (total_order(alpha) > ThetaFunction::kMaxOrder) throw InvalidInput("unsupported derivative order");
  std::vector<double> phi(model.num_uncertain, 0.0);
  auto x = model.variables(p, phi);
  auto xr = reference_vars(model);
  MultiIndex zero(model.num_vars(), 0);
  const bool value = total_order(alpha) == 0;
  double ub = 0.0;
  for (int b = 0; b < static_cast<int>(model.stiffness.blocks.size()); ++b) {
    Vector ev = relative_eigenvalues(model.stiffness.block_tensor(b, x, alpha), model.stiffness.block_tensor(b, xr, zero));
    ub = std::max(ub, value ? ev.maxCoeff() : ev.cwiseAbs().maxCoeff());
  }
  return ub * c.gamma_ref;
}

double continuity_upper_bound(const AffineModel& model, const StabilityConstants& c, std::span<const double> p, int i,
                              int k) {
  if (i < 0 || i >= model.num_design) throw InvalidInput("design parameter index out of range");
  if (k < 0) throw InvalidInput("negative derivative order");
  return continuity_upper_bound(model, c, p, unit_index(model.num_vars(), i, k));
}

double residual_dual_norm(const Vector& residual, const SpdFactorization& w) {
  if (residual.size() != w.dimension()) throw InvalidInput("residual dimension does not match W");
  if (residual.squaredNorm() == 0.0) return 0.0;
  Vector z = w.solve(residual, 1e-12);
  return std::sqrt(std::max(0.0, residual.dot(z)));
}

double residual_dual_norm(const Vector& residual, const SparseMatrix& w) {
  return residual_dual_norm(residual, SpdFactorization(w));
}

double ErrorBound::at(const MultiIndex& alpha) const {
  auto it = delta.find(alpha);
  if (it == delta.end()) throw InvalidInput("no error bound for " + to_string(alpha));
  return it->second;
}

Certifier::Certifier(const AffineModel& model, const PodBasis& basis)
    : Certifier(model, basis, compute_stability_constants(model)) {}

Certifier::Certifier(const AffineModel& model, const PodBasis& basis, StabilityConstants constants)
    : model_(model), basis_(basis), constants_(constants), w_factor_(model.weight) {
  if (!basis.projected()) throw InvalidInput("certification needs a projected basis");
}

Vector Certifier::residual(std::span<const double> x, const MultiIndex& alpha, const SensitivityBundle& reduced) const {
  Vector r = model_.load.derivative(x, alpha);
  MultiIndex zero(alpha.size(), 0);
  auto subs = nonzero_sub_indices(alpha);
  subs.insert(subs.begin(), zero);
  for (const auto& beta : subs) {
    Vector lifted = basis_.lift(reduced.at(subtract(alpha, beta)));
    r -= multi_binomial(alpha, beta) * model_.stiffness.apply(x, beta, lifted);
  }
  return r;
}

ErrorBound Certifier::bounds(std::span<const double> p, std::span<const double> phi,
                             const std::vector<MultiIndex>& wanted, const SensitivityBundle& reduced) const {
  ErrorBound eb;
  eb.p.assign(p.begin(), p.end());
  eb.phi.assign(phi.begin(), phi.end());
  eb.alpha_lb = coercivity_lower_bound(model_, constants_, p);
  auto x = model_.variables(p, phi);

  std::function<double(const MultiIndex&)> get = [&](const MultiIndex& alpha) -> double {
    auto it = eb.delta.find(alpha);
    if (it != eb.delta.end()) return it->second;
    double rn = residual_dual_norm(residual(x, alpha, reduced), w_factor_);
    double num = rn;
    for (const auto& beta : nonzero_sub_indices(alpha)) {
      double g = continuity_upper_bound(model_, constants_, p, beta);
      if (g != 0.0) num += multi_binomial(alpha, beta) * g * get(subtract(alpha, beta));
    }
    eb.residual[alpha] = rn;
    double d = num / eb.alpha_lb;
    eb.delta[alpha] = d;
    return d;
  };
  get(MultiIndex(model_.num_vars(), 0));
  for (const auto& a : wanted) get(a);
  return eb;
}

ErrorBound Certifier::bounds(std::span<const double> p, std::span<const double> phi,
                             const std::vector<MultiIndex>& wanted) const {
  ReducedSolver rs(model_, basis_, p);
  return bounds(p, phi, wanted, rs.solve(phi, wanted));
}

double state_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi) {
  return general_error_bound(cert, p, phi, MultiIndex(p.size() + phi.size(), 0));
}

double sensitivity_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi, int i) {
  if (i < 0 || i >= static_cast<int>(p.size())) throw InvalidInput("design parameter index out of range");
  return general_error_bound(cert, p, phi, unit_index(static_cast<int>(p.size() + phi.size()), i));
}

double general_error_bound(const Certifier& cert, std::span<const double> p, std::span<const double> phi,
                           const MultiIndex& alpha) {
  return cert.bounds(p, phi, {alpha}).at(alpha);
}

}  // namespace certrom
