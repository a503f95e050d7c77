// SPDX-License-Identifier: Apache-2.0

#include "certrom/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace certrom {

std::string to_string(DesignMode m) {
  switch (m) {
    case DesignMode::nominal: return "nominal";
    case DesignMode::robust_linear: return "robust-lin";
    case DesignMode::robust_quadratic: return "robust-quad";
  }
  return "unknown";
}

DesignMode parse_design_mode(const std::string& s) {
  if (s == "nominal") return DesignMode::nominal;
  if (s == "robust-lin" || s == "robust-linear") return DesignMode::robust_linear;
  if (s == "robust-quad" || s == "robust-quadratic") return DesignMode::robust_quadratic;
  throw InvalidInput("unknown mode '" + s + "' (expected nominal, robust-lin or robust-quad)");
}

namespace {

bool same(std::span<const double> a, const std::vector<double>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

void require_benchmark_shape(const AffineModel& model) {
  if (model.num_design != 3 || model.num_uncertain != 1) {
    throw InvalidInput("design problem needs three design parameters and one angle");
  }
}

}  // namespace

FullBackend::FullBackend(const AffineModel& model, double tol) : model_(model), tol_(tol) {}

std::map<MultiIndex, double> FullBackend::outputs(std::span<const double> p, std::span<const double> phi,
                                                  const std::vector<MultiIndex>& indices) {
  if (!solver_ || !same(p, p_)) {
    if (solver_) retired_ += solver_->solves();
    solver_.reset();
    bundle_.reset();
    solver_ = std::make_unique<FullOrderSolver>(model_, p, tol_);
    p_.assign(p.begin(), p.end());
  }
  if (!bundle_ || !same(phi, bundle_->phi)) {
    bundle_ = solver_->solve(phi, indices);
  } else {
    solver_->extend(*bundle_, indices);
  }
  std::map<MultiIndex, double> out;
  for (const auto& a : indices) out[a] = model_.output.dot(bundle_->at(a));
  return out;
}

long FullBackend::solves() const { return retired_ + (solver_ ? solver_->solves() : 0); }

RomBackend::RomBackend(const AffineModel& model, const PodBasis& basis) : model_(model), basis_(basis) {
  if (!basis.projected()) throw InvalidInput("reduced backend needs a projected basis");
}

std::map<MultiIndex, double> RomBackend::outputs(std::span<const double> p, std::span<const double> phi,
                                                 const std::vector<MultiIndex>& indices) {
  if (!solver_ || !same(p, p_)) {
    if (solver_) retired_ += solver_->solves();
    solver_.reset();
    bundle_.reset();
    solver_ = std::make_unique<ReducedSolver>(model_, basis_, p);
    p_.assign(p.begin(), p.end());
  }
  if (!bundle_ || !same(phi, bundle_->phi)) {
    bundle_ = solver_->solve(phi, indices);
  } else {
    solver_->extend(*bundle_, indices);
  }
  std::map<MultiIndex, double> out;
  for (const auto& a : indices) out[a] = basis_.output.dot(bundle_->at(a));
  return out;
}

long RomBackend::solves() const { return retired_ + (solver_ ? solver_->solves() : 0); }

void DesignProblem::validate() const {
  if (!(rho > 0.0)) throw InvalidInput("design problem: rho must be positive");
  set.validate();
  if (set.dimension() != 1) throw InvalidInput("design problem: the benchmark has one uncertain angle");
  for (int i = 0; i < 3; ++i) {
    if (!(lower[i] < upper[i])) throw InvalidInput("design problem: empty bound interval");
  }
}

double design_target(const AffineModel& model, std::span<const double> p0, double phi) {
  std::vector<double> ph{phi};
  return model.output.dot(solve_state(model, p0, ph));
}

UncertainProblem design_uncertain_problem(const AffineModel& model, const DesignProblem& problem,
                                          OutputBackend& backend) {
  require_benchmark_shape(model);
  problem.validate();
  const int nv = model.num_vars();
  const MultiIndex zero(nv, 0);

  struct Row {
    std::string name;
    Vector grad;     // constant gradient over x = (p, ξ)
    double offset;   // value = grad·x + offset, except the output row
    bool output = false;
  };
  std::vector<Row> rows;
  rows.push_back({"height p2+p3", Vector{{0, 1, 1, 0}}, -problem.height_limit});
  rows.push_back({"slope 3p1-2p3", Vector{{3, 0, -2, 0}}, -problem.slope_limit});
  rows.push_back({"target", Vector::Zero(4), 0.0, true});
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(problem.lower[i])) continue;
    Vector g = Vector::Zero(4);
    g[i] = -1.0;
    rows.push_back({"lower p" + std::to_string(i + 1), g, problem.lower[i]});
  }
  rows.push_back({"slack xi", Vector{{0, 0, 0, -1}}, 0.0});
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(problem.upper[i])) continue;
    Vector g = Vector::Zero(4);
    g[i] = 1.0;
    rows.push_back({"upper p" + std::to_string(i + 1), g, -problem.upper[i]});
  }
  const int m = static_cast<int>(rows.size());
  const int target_row = 3;  // function index of g₃

  UncertainProblem up;
  up.n = 4;
  up.num_ineq = m;
  up.num_uncertain = 1;
  up.phi_dependent.assign(m + 1, false);
  up.phi_dependent[target_row] = true;
  for (const auto& r : rows) up.ineq_names.push_back(r.name);

  const double rho = problem.rho;
  const double target = problem.target;
  const double angle = problem.expansion_angle();
  const int np = model.num_design;
  up.evaluate = [&backend, rows, m, nv, np, zero, rho, target, angle](const Vector& x, int phi_order, bool grads) {
    std::array<double, 3> p{x[0], x[1], x[2]};
    std::array<double, 1> phi{angle};
    const double xi = x[3];
    // Index α = (i, k): i-th p-derivative (−1 for none) of ∂_φ^k.
    auto index = [&](int i, int k) {
      MultiIndex a = zero;
      a[np] = k;
      if (i >= 0) a[i] += 1;
      return a;
    };
    std::vector<MultiIndex> wanted;
    for (int k = 0; k <= phi_order; ++k) {
      wanted.push_back(index(-1, k));
      for (int i = 0; i < np && grads; ++i) wanted.push_back(index(i, k));
    }
    auto out = backend.outputs(p, phi, wanted);

    UncertainEval ev;
    ev.value.resize(m + 1);
    ev.grad_x = Matrix::Zero(m + 1, 4);
    ev.grad_phi = Matrix::Zero(m + 1, 1);
    ev.grad_phi_x.assign(m + 1, Matrix::Zero(1, 4));
    ev.hess_phi.assign(m + 1, Matrix::Zero(1, 1));
    ev.hess_phi_x.assign(m + 1, std::vector<Matrix>(4, Matrix::Zero(1, 1)));

    ev.value[0] = p[0] * p[1] + rho * xi;
    ev.grad_x.row(0) = Vector{{p[1], p[0], 0.0, rho}}.transpose();
    for (int r = 0; r < m; ++r) {
      if (rows[r].output) {
        ev.value[r + 1] = target - out.at(index(-1, 0)) - xi;
        ev.grad_x(r + 1, 3) = -1.0;
        if (grads) {
          for (int i = 0; i < np; ++i) ev.grad_x(r + 1, i) = -out.at(index(i, 0));
        }
        if (phi_order >= 1) {
          ev.grad_phi(r + 1, 0) = -out.at(index(-1, 1));
          if (grads) {
            for (int i = 0; i < np; ++i) ev.grad_phi_x[r + 1](0, i) = -out.at(index(i, 1));
          }
        }
        if (phi_order >= 2) {
          ev.hess_phi[r + 1](0, 0) = -out.at(index(-1, 2));
          if (grads) {
            for (int i = 0; i < np; ++i) ev.hess_phi_x[r + 1][i](0, 0) = -out.at(index(i, 2));
          }
        }
      } else {
        ev.value[r + 1] = rows[r].grad.dot(x) + rows[r].offset;
        ev.grad_x.row(r + 1) = rows[r].grad.transpose();
      }
    }
    (void)nv;
    return ev;
  };
  return up;
}

NlpProblem build_design_nlp(const AffineModel& model, const DesignProblem& problem, OutputBackend& backend,
                            double tau) {
  UncertainProblem up = design_uncertain_problem(model, problem, backend);
  switch (problem.mode) {
    case DesignMode::nominal: return build_nominal_nlp(up);
    case DesignMode::robust_linear: return build_linear_robust_nlp(up, problem.set);
    case DesignMode::robust_quadratic: return build_quadratic_robust_mpec(up, problem.set, tau);
  }
  throw InvalidInput("unknown design mode");
}

DesignSolution optimize_design(const AffineModel& model, const DesignProblem& problem, OutputBackend& backend,
                               std::span<const double> p0, double xi0, const DesignOptions& opts) {
  if (p0.size() != 3) throw InvalidInput("design start needs three parameters");
  UncertainProblem up = design_uncertain_problem(model, problem, backend);
  const int target_fn = 3;
  Vector x0{{p0[0], p0[1], p0[2], 0.0}};
  const int order = problem.mode == DesignMode::nominal ? 0 : problem.mode == DesignMode::robust_linear ? 1 : 2;
  UncertainEval e = up.evaluate(x0, order, false);
  double worst = e.value[target_fn];
  Vector b = e.grad_phi.row(target_fn).transpose();
  if (problem.mode == DesignMode::robust_linear) worst = linear_worst_case(worst, b, problem.set);
  if (problem.mode == DesignMode::robust_quadratic) {
    worst = solve_trust_region_subproblem({worst, b, e.hess_phi[target_fn]}, problem.set.scale).value;
  }
  x0[3] = xi0 >= 0.0 ? xi0 : std::max(0.0, worst);

  DesignSolution sol;
  OptResult r;
  if (problem.mode == DesignMode::robust_quadratic) {
    MpecResult mr = solve_quadratic_robust(up, problem.set, x0, opts.mpec);
    r = mr.final;
    for (const auto& st : mr.steps) sol.history.insert(sol.history.end(), st.history.begin(), st.history.end());
    sol.mpec = std::move(mr);
    sol.iterations = sol.mpec->total_iterations;
    sol.converged = std::all_of(sol.mpec->steps.begin(), sol.mpec->steps.end(),
                                [](const OptResult& s) { return s.converged(); }) &&
                    sol.mpec->steps.size() == opts.mpec.taus.size();
  } else {
    NlpProblem nlp = problem.mode == DesignMode::nominal ? build_nominal_nlp(up)
                                                         : build_linear_robust_nlp(up, problem.set);
    Vector z0 = Vector::Zero(nlp.n);
    z0.head(4) = x0;
    for (int j = 4; j < nlp.n; ++j) z0[j] = std::abs(problem.set.scale[j - 4] * b[j - 4]);
    r = solve_sqp(nlp, z0, opts.sqp);
    sol.history = r.history;
    sol.iterations = r.iterations;
    sol.converged = r.converged();
  }
  sol.z = r.x;
  sol.p = {r.x[0], r.x[1], r.x[2]};
  sol.xi = r.x[3];
  sol.volume = sol.p[0] * sol.p[1];
  sol.objective = r.objective;
  sol.violation = r.violation;
  sol.kkt = r.kkt;
  sol.status = to_string(r.status);
  return sol;
}

std::vector<MultiIndex> snapshot_indices(const AffineModel& model, DesignMode mode) {
  switch (mode) {
    case DesignMode::nominal: return design_gradient_indices(model);
    case DesignMode::robust_linear: return robust_indices(model, 1);
    case DesignMode::robust_quadratic: return robust_indices(model, 2);
  }
  throw InvalidInput("unknown design mode");
}

long expected_full_solves(const AffineModel& model, DesignMode mode, int outer_iterations, bool converged) {
  const long s = static_cast<long>(snapshot_indices(model, mode).size());
  // The check solve at φ_check doubles as the state snapshot only when the
  // snapshots are taken at the same angle.
  const long enrich = mode == DesignMode::nominal ? s - 1 : s;
  const long enrichments = converged ? outer_iterations - 1 : outer_iterations;
  return s + outer_iterations + enrich * enrichments;
}

Algorithm1Result run_algorithm1(const AffineModel& model, const DesignProblem& problem, std::span<const double> p0,
                                const StabilityConstants& constants, const Algorithm1Options& opts) {
  require_benchmark_shape(model);
  problem.validate();
  if (!(opts.tol > 0.0)) throw InvalidInput("loop tolerance must be positive");
  if (p0.size() != 3) throw InvalidInput("design start needs three parameters");
  model.check_admissible(p0);

  Algorithm1Result res;
  const auto idx = snapshot_indices(model, problem.mode);
  const MultiIndex zero(model.num_vars(), 0);
  const std::vector<double> snap_phi{problem.expansion_angle()};
  const std::vector<double> check_phi{problem.phi_check};
  const bool reuse_check = snap_phi == check_phi;

  {
    FullOrderSolver fs(model, p0);
    res.snapshots.add_bundle(fs.solve(snap_phi, idx), idx);
    res.trace.full_solves += fs.solves();
  }

  std::array<double, 3> p{p0[0], p0[1], p0[2]};
  double xi = -1.0;
  int failures = 0;
  res.trace.status = "max_outer reached";
  for (int it = 1; it <= opts.max_outer; ++it) {
    res.basis = project_affine(model, compute_pod(res.snapshots, model.weight));
    RomBackend rom(model, res.basis);
    DesignSolution sol = optimize_design(model, problem, rom, p, xi, opts.design);
    res.trace.reduced_solves += rom.solves();

    LoopRow row;
    row.iter = it;
    row.p = sol.p;
    row.xi = sol.xi;
    row.volume = sol.volume;
    row.sqp_iterations = sol.iterations;
    row.ell = res.basis.size();
    row.sqp_converged = sol.converged;

    ReducedSolver rs(model, res.basis, sol.p);
    SensitivityBundle rb = rs.solve(check_phi, {});
    res.trace.reduced_solves += rs.solves();
    row.e0_rom = res.basis.output.dot(rb.at(zero));

    FullOrderSolver fs(model, sol.p);
    SensitivityBundle fb = fs.solve(check_phi, {});
    row.e0_full = model.output.dot(fb.at(zero));
    Certifier cert(model, res.basis, constants);
    row.delta_u = cert.bounds(sol.p, check_phi, {zero}, rb).at(zero);
    res.trace.rows.push_back(row);
    res.design = sol;

    failures = sol.converged ? 0 : failures + 1;
    if (sol.converged && std::abs(row.e0_rom - row.e0_full) <= opts.tol) {
      res.trace.full_solves += fs.solves();
      res.trace.converged = true;
      res.trace.status = "converged";
      break;
    }
    if (failures >= 2) {
      res.trace.full_solves += fs.solves();
      res.trace.status = "reduced optimization failed: " + sol.status;
      break;
    }
    if (reuse_check) {
      fs.extend(fb, idx);
      res.snapshots.add_bundle(fb, idx);
    } else {
      res.snapshots.add_bundle(fs.solve(snap_phi, idx), idx);
    }
    res.trace.full_solves += fs.solves();
    p = sol.p;
    xi = sol.xi;
  }
  return res;
}

GridMaximum worst_case_output(const AffineModel& model, const DesignProblem& problem, std::span<const double> p,
                              long grid_points) {
  problem.set.validate();
  FullOrderSolver fs(model, p);
  const MultiIndex zero(model.num_vars(), 0);
  auto neg_output = [&](const Vector& phi) {
    std::vector<double> ph(phi.data(), phi.data() + phi.size());
    return -model.output.dot(fs.solve(ph, {}).at(zero));
  };
  GridMaximum g = brute_force_worst_case(neg_output, problem.set, grid_points);
  g.value = -g.value;
  return g;
}

std::vector<std::array<double, 3>> tensor_grid(const std::vector<double>& a, const std::vector<double>& b,
                                               const std::vector<double>& c) {
  std::vector<std::array<double, 3>> out;
  for (double x : a) {
    for (double y : b) {
      for (double z : c) out.push_back({x, y, z});
    }
  }
  return out;
}

std::vector<std::array<double, 3>> box_centres(const std::vector<double>& a, const std::vector<double>& b,
                                               const std::vector<double>& c) {
  auto mids = [](const std::vector<double>& v) {
    std::vector<double> m;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) m.push_back(0.5 * (v[i] + v[i + 1]));
    return m;
  };
  return tensor_grid(mids(a), mids(b), mids(c));
}

PodBasis truncate_basis(const AffineModel& model, const PodBasis& basis, int ell) {
  if (ell < 1 || ell > basis.size()) throw InvalidInput("basis size out of range");
  PodBasis b;
  b.psi = basis.psi.leftCols(ell);
  b.eigenvalues = basis.eigenvalues;
  b.rank = basis.rank;
  b.weight = basis.weight;
  return project_affine(model, std::move(b));
}

ErrorStudy run_error_study(const AffineModel& model, const std::vector<std::array<double, 3>>& train,
                           const std::vector<std::array<double, 3>>& test, const std::vector<int>& ells,
                           const StabilityConstants& constants, double phi) {
  require_benchmark_shape(model);
  if (train.empty() || test.empty()) throw InvalidInput("error study needs training and test designs");
  const int nv = model.num_vars();
  const std::vector<double> ph{phi};

  ErrorStudy st;
  st.indices = design_gradient_indices(model);
  st.indices.push_back(unit_index(nv, model.num_design, 2));
  st.labels = {"0", "p1", "p2", "p3", "phiphi"};

  SnapshotSet snaps;
  const auto train_idx = design_gradient_indices(model);
  for (const auto& p : train) {
    FullOrderSolver fs(model, p);
    snaps.add_bundle(fs.solve(ph, train_idx), train_idx);
  }
  PodBasis full = compute_pod(snaps, model.weight);
  st.eigenvalues = full.eigenvalues;
  st.rank = full.rank;
  st.snapshots = snaps.size();

  std::vector<SensitivityBundle> reference;
  for (const auto& p : test) {
    FullOrderSolver fs(model, p);
    reference.push_back(fs.solve(ph, st.indices));
  }

  std::set<int> sizes;
  for (int l : ells) sizes.insert(std::clamp(l, 1, full.rank));
  const std::size_t ni = st.indices.size();
  for (int ell : sizes) {
    PodBasis basis = truncate_basis(model, full, ell);
    Certifier cert(model, basis, constants);
    ErrorStudyRow row;
    row.ell = ell;
    row.error.assign(ni, 0.0);
    row.bound.assign(ni, 0.0);
    row.min_effectivity.assign(ni, std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < test.size(); ++t) {
      ReducedSolver rs(model, basis, test[t]);
      SensitivityBundle rb = rs.solve(ph, st.indices);
      ErrorBound eb = cert.bounds(test[t], ph, st.indices, rb);
      for (std::size_t k = 0; k < ni; ++k) {
        Vector e = reference[t].at(st.indices[k]) - basis.lift(rb.at(st.indices[k]));
        double err = std::sqrt(std::max(0.0, e.dot(model.weight * e)));
        double bnd = eb.at(st.indices[k]);
        row.error[k] = std::max(row.error[k], err);
        row.bound[k] = std::max(row.bound[k], bnd);
        if (err > 0.0) row.min_effectivity[k] = std::min(row.min_effectivity[k], bnd / err);
        if (err > bnd) ++row.violations;
      }
    }
    st.rows.push_back(std::move(row));
  }
  return st;
}

}  // namespace certrom
