// SPDX-License-Identifier: Apache-2.0

#include "certrom/sensitivity.hpp"

namespace certrom {

const Vector& SensitivityBundle::at(const MultiIndex& alpha) const {
  auto it = u.find(alpha);
  if (it == u.end()) throw InvalidInput("sensitivity " + to_string(alpha) + " not available");
  return it->second;
}

Vector solve_state(const AffineModel& model, std::span<const double> p, std::span<const double> phi, double tol) {
  SparseMatrix k = eval_operator(model, p);
  return solve_sparse(k, eval_rhs(model, p, phi), tol);
}

namespace {

Vector full_rhs(const AffineModel& model, std::span<const double> x, const MultiIndex& alpha,
                const std::function<const Vector&(const MultiIndex&)>& lower) {
  return leibniz_rhs<Vector>(
      alpha, [&](const MultiIndex& beta, const Vector& v) -> Vector { return model.stiffness.apply(x, beta, v); },
      [&](const MultiIndex& a) { return model.load.derivative(x, a); }, lower);
}

void check_order(const AffineModel& model, const MultiIndex& alpha) {
  if (static_cast<int>(alpha.size()) != model.num_vars()) throw InvalidInput("multi-index has wrong length");
  for (int a : alpha) {
    if (a < 0) throw InvalidInput("negative multi-index entry");
  }
  if (total_order(alpha) > ThetaFunction::kMaxOrder) {
    throw InvalidInput("sensitivity order " + std::to_string(total_order(alpha)) + " exceeds the available derivatives");
  }
}

}  // namespace

Vector solve_sensitivity(const AffineModel& model, std::span<const double> p, std::span<const double> phi,
                         const SensitivityMap& lower, const MultiIndex& alpha, double tol) {
  check_order(model, alpha);
  SparseMatrix k = eval_operator(model, p);
  auto x = model.variables(p, phi);
  auto get = [&](const MultiIndex& g) -> const Vector& {
    auto it = lower.find(g);
    if (it == lower.end()) throw InvalidInput("missing lower-order sensitivity " + to_string(g));
    return it->second;
  };
  return solve_sparse(k, full_rhs(model, x, alpha, get), tol);
}

FullOrderSolver::FullOrderSolver(const AffineModel& model, std::span<const double> p, double tol)
    : model_(model), p_(p.begin(), p.end()), tol_(tol), factor_(eval_operator(model, p)) {}

void FullOrderSolver::ensure(SensitivityBundle& b, const MultiIndex& alpha) {
  if (b.has(alpha)) return;
  check_order(model_, alpha);
  for (const auto& beta : nonzero_sub_indices(alpha)) ensure(b, subtract(alpha, beta));
  auto x = model_.variables(p_, b.phi);
  Vector rhs = full_rhs(model_, x, alpha, [&](const MultiIndex& g) -> const Vector& { return b.at(g); });
  b.u.emplace(alpha, factor_.solve(rhs, tol_));
  ++solves_;
}

void FullOrderSolver::extend(SensitivityBundle& bundle, const std::vector<MultiIndex>& wanted) {
  if (bundle.p != p_) throw InvalidInput("bundle belongs to a different design");
  for (const auto& a : wanted) ensure(bundle, a);
}

SensitivityBundle FullOrderSolver::solve(std::span<const double> phi, const std::vector<MultiIndex>& wanted) {
  SensitivityBundle b;
  b.p = p_;
  b.phi.assign(phi.begin(), phi.end());
  ensure(b, MultiIndex(model_.num_vars(), 0));
  for (const auto& a : wanted) ensure(b, a);
  return b;
}

std::vector<MultiIndex> design_gradient_indices(const AffineModel& model) {
  const int nv = model.num_vars();
  std::vector<MultiIndex> out{MultiIndex(nv, 0)};
  for (int i = 0; i < model.num_design; ++i) out.push_back(unit_index(nv, i));
  return out;
}

std::vector<MultiIndex> robust_indices(const AffineModel& model, int phi_order) {
  if (phi_order < 0 || phi_order > 2) throw InvalidInput("phi order must be 0, 1 or 2");
  const int nv = model.num_vars();
  const int np = model.num_design;
  std::vector<MultiIndex> phi_parts{MultiIndex(nv, 0)};
  for (int j = 0; j < model.num_uncertain && phi_order >= 1; ++j) phi_parts.push_back(unit_index(nv, np + j));
  for (int j = 0; j < model.num_uncertain && phi_order >= 2; ++j) {
    for (int k = j; k < model.num_uncertain; ++k) {
      MultiIndex a(nv, 0);
      a[np + j] += 1;
      a[np + k] += 1;
      phi_parts.push_back(a);
    }
  }
  std::vector<MultiIndex> out;
  for (const auto& base : phi_parts) {
    out.push_back(base);
    for (int i = 0; i < np; ++i) {
      MultiIndex a = base;
      a[i] += 1;
      out.push_back(a);
    }
  }
  return out;
}

double output_derivative(const AffineModel& model, const SensitivityBundle& bundle, const MultiIndex& alpha) {
  return model.output.dot(bundle.at(alpha));
}

OutputDerivatives output_and_gradients(const AffineModel& model, const SensitivityBundle& bundle) {
  return output_and_gradients(model, bundle, model.output);
}

OutputDerivatives output_and_gradients(const AffineModel& model, const SensitivityBundle& bundle,
                                       const Vector& functional) {
  auto output_derivative = [&](const AffineModel&, const SensitivityBundle& b, const MultiIndex& a) {
    return functional.dot(b.at(a));
  };
  const int nv = model.num_vars();
  const int np = model.num_design;
  const int nphi = model.num_uncertain;
  OutputDerivatives out;
  out.e0 = output_derivative(model, bundle, MultiIndex(nv, 0));
  out.dp.resize(np);
  for (int i = 0; i < np; ++i) out.dp[i] = output_derivative(model, bundle, unit_index(nv, i));
  bool first = nphi > 0;
  for (int j = 0; j < nphi; ++j) first = first && bundle.has(unit_index(nv, np + j));
  if (first) {
    out.dphi.resize(nphi);
    for (int j = 0; j < nphi; ++j) out.dphi[j] = output_derivative(model, bundle, unit_index(nv, np + j));
  }
  bool second = first;
  for (int j = 0; j < nphi && second; ++j) {
    for (int k = j; k < nphi; ++k) {
      MultiIndex a(nv, 0);
      a[np + j] += 1;
      a[np + k] += 1;
      second = second && bundle.has(a);
    }
  }
  if (second) {
    out.dphiphi.resize(nphi, nphi);
    for (int j = 0; j < nphi; ++j) {
      for (int k = j; k < nphi; ++k) {
        MultiIndex a(nv, 0);
        a[np + j] += 1;
        a[np + k] += 1;
        out.dphiphi(j, k) = out.dphiphi(k, j) = output_derivative(model, bundle, a);
      }
    }
  }
  return out;
}

}  // namespace certrom
