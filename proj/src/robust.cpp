// SPDX-License-Identifier: Apache-2.0

#include "certrom/robust.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace certrom {

std::string to_string(NormIndex k) { return k == NormIndex::two ? "2" : "inf"; }

NormIndex parse_norm_index(const std::string& s) {
  if (s == "2") return NormIndex::two;
  if (s == "inf" || s == "infinity" || s == "Inf") return NormIndex::infinity;
  throw InvalidInput("norm index must be 2 or inf, got '" + s + "'");
}

void UncertaintySet::validate() const {
  if (nominal.size() == 0) throw InvalidInput("uncertainty set: empty nominal value");
  if (scale.size() != nominal.size()) throw InvalidInput("uncertainty set: scaling has wrong length");
  if (!(scale.minCoeff() > 0.0)) throw InvalidInput("uncertainty set: scaling must be positive");
}

bool UncertaintySet::contains(const Vector& phi, double tol) const {
  Vector z = (phi - nominal).cwiseQuotient(scale);
  double r = k == NormIndex::two ? z.norm() : z.lpNorm<Eigen::Infinity>();
  return r <= 1.0 + tol;
}

double dual_norm(const Vector& v, const Vector& d, NormIndex k) {
  if (v.size() != d.size()) throw InvalidInput("dual_norm: size mismatch");
  Vector w = d.cwiseProduct(v);
  return k == NormIndex::two ? w.norm() : w.lpNorm<1>();
}

double linear_worst_case(double value, const Vector& grad_phi, const UncertaintySet& set) {
  return value + dual_norm(grad_phi, set.scale, set.k);
}

namespace {

double model_value(const QuadraticWorstCaseModel& m, const Vector& delta) {
  return m.value + m.grad.dot(delta) + 0.5 * delta.dot(m.hess * delta);
}

TrustRegionSolution solve_scalar(const QuadraticWorstCaseModel& m, double d) {
  const double b = m.grad[0];
  const double h = m.hess(0, 0);
  TrustRegionSolution s;
  s.delta = Vector::Zero(1);
  double best = -std::numeric_limits<double>::infinity();
  if (h < 0.0 && std::abs(b / h) <= d) {
    s.delta[0] = -b / h;
    best = model_value(m, s.delta);
    s.lambda = 0.0;
  }
  for (double e : {d, -d}) {
    Vector de = Vector::Constant(1, e);
    double v = model_value(m, de);
    if (v > best) {
      best = v;
      s.delta = de;
      s.lambda = d * d * (b / e + h);
    }
  }
  s.value = best;
  return s;
}

}  // namespace

TrustRegionSolution solve_trust_region_subproblem(const QuadraticWorstCaseModel& model, const Vector& d) {
  const int n = static_cast<int>(d.size());
  if (n == 0 || model.grad.size() != n || model.hess.rows() != n || model.hess.cols() != n) {
    throw InvalidInput("trust-region subproblem: inconsistent sizes");
  }
  if (!(d.minCoeff() > 0.0)) throw InvalidInput("trust-region subproblem: scaling must be positive");
  if (n == 1) return solve_scalar(model, d[0]);

  // η = D⁻¹δ: minimize ½ηᵀAη + cᵀη over ‖η‖ ≤ 1 with A = −DHD, c = −Db.
  Matrix hs = 0.5 * (model.hess + model.hess.transpose());
  Matrix a = -(d.asDiagonal() * hs * d.asDiagonal());
  Vector c = -d.cwiseProduct(model.grad);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector& lam = es.eigenvalues();
  const Matrix& q = es.eigenvectors();
  Vector ch = q.transpose() * c;
  const double scale = std::max({1.0, lam.cwiseAbs().maxCoeff(), c.norm()});

  auto eta_at = [&](double mu, bool skip_min) {
    Vector coef = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (skip_min && lam[i] <= lam[0] + 1e-12 * scale) continue;
      coef[i] = -ch[i] / (lam[i] + mu);
    }
    return coef;
  };

  TrustRegionSolution s;
  Vector coef;
  double mu = 0.0;
  bool done = false;
  if (lam[0] > 0.0) {
    coef = eta_at(0.0, false);
    if (coef.norm() <= 1.0) done = true;
  }
  if (!done) {
    const double lo = std::max(0.0, -lam[0]);
    double low_mass = 0.0;
    for (int i = 0; i < n; ++i) {
      if (lam[i] <= lam[0] + 1e-12 * scale) low_mass += ch[i] * ch[i];
    }
    bool hard = false;
    if (std::sqrt(low_mass) <= 1e-13 * scale) {
      Vector rest = eta_at(lo, true);
      if (rest.norm() <= 1.0) {
        hard = true;
        mu = lo;
        coef = rest;
        double t = std::sqrt(std::max(0.0, 1.0 - rest.squaredNorm()));
        coef[0] += t;
        s.hard_case = true;
      }
    }
    if (!hard) {
      // Secular equation 1/‖η(μ)‖ = 1 on (lo, hi], bracketed bisection with Newton.
      double left = lo;
      double right = lo + c.norm() + lam.cwiseAbs().maxCoeff() + 1.0;
      mu = right;
      for (int it = 0; it < 300; ++it) {
        Vector e = eta_at(mu, false);
        double nrm = e.norm();
        double f = 1.0 / nrm - 1.0;
        if (f < 0.0) left = mu; else right = mu;
        if (std::abs(f) < 1e-15 || right - left <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, right)) break;
        // d/dμ (1/‖η‖) = (Σ c_i²/(λ_i+μ)³) / ‖η‖³
        double num = 0.0;
        for (int i = 0; i < n; ++i) num += ch[i] * ch[i] / std::pow(lam[i] + mu, 3);
        double df = num / (nrm * nrm * nrm);
        double next = mu - f / df;
        mu = (next > left && next < right && std::isfinite(next)) ? next : 0.5 * (left + right);
      }
      coef = eta_at(mu, false);
    }
  }
  Vector eta = q * coef;
  s.delta = d.cwiseProduct(eta);
  s.lambda = mu;
  s.value = model_value(model, s.delta);
  return s;
}

double trust_region_kkt_error(const QuadraticWorstCaseModel& model, const Vector& d, const TrustRegionSolution& s) {
  const int n = static_cast<int>(d.size());
  Vector dinv2 = d.cwiseProduct(d).cwiseInverse();
  Matrix shifted = -model.hess;
  shifted.diagonal() += s.lambda * dinv2;
  double err = (shifted * s.delta - model.grad).lpNorm<Eigen::Infinity>();
  double r = s.delta.cwiseQuotient(d).norm();
  err = std::max(err, r - 1.0);
  err = std::max(err, std::abs(s.lambda * (r - 1.0)));
  err = std::max(err, -s.lambda);
  // Definiteness in the scaled variables.
  Matrix scaled = d.asDiagonal() * shifted * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (scaled + scaled.transpose()), Eigen::EigenvaluesOnly);
  err = std::max(err, -es.eigenvalues()[0]);
  (void)n;
  return err;
}

GridMaximum brute_force_worst_case(const std::function<double(const Vector&)>& evaluator, const UncertaintySet& set,
                                   long grid_points) {
  set.validate();
  const int n = set.dimension();
  if (n > 2) throw InvalidInput("brute-force worst case supports at most two uncertain parameters");
  if (grid_points < 2) throw InvalidInput("brute-force worst case needs at least two grid points");
  GridMaximum gm;
  gm.value = -std::numeric_limits<double>::infinity();
  auto visit = [&](const Vector& eta) {
    Vector phi = set.nominal + set.scale.cwiseProduct(eta);
    double v = evaluator(phi);
    ++gm.points;
    if (v > gm.value) {
      gm.value = v;
      gm.argmax = phi;
    }
  };
  if (n == 1) {
    for (long i = 0; i < grid_points; ++i) visit(Vector::Constant(1, -1.0 + 2.0 * i / (grid_points - 1)));
    gm.resolution = set.scale[0] / (grid_points - 1);
    return gm;
  }
  if (set.k == NormIndex::infinity) {
    long s = std::max<long>(2, std::lround(std::floor(std::sqrt(static_cast<double>(grid_points)))));
    for (long i = 0; i < s; ++i) {
      for (long j = 0; j < s; ++j) visit(Vector{{-1.0 + 2.0 * i / (s - 1), -1.0 + 2.0 * j / (s - 1)}});
    }
    gm.resolution = set.scale.norm() / (s - 1);
    return gm;
  }
  long boundary = std::max<long>(8, grid_points / 5);
  long s = std::max<long>(2, std::lround(std::floor(std::sqrt(4.0 * (grid_points - boundary) / std::numbers::pi))));
  for (long i = 0; i < s; ++i) {
    for (long j = 0; j < s; ++j) {
      Vector eta{{-1.0 + 2.0 * i / (s - 1), -1.0 + 2.0 * j / (s - 1)}};
      if (eta.squaredNorm() <= 1.0) visit(eta);
    }
  }
  for (long k = 0; k < boundary; ++k) {
    double t = 2.0 * std::numbers::pi * k / boundary;
    visit(Vector{{std::cos(t), std::sin(t)}});
  }
  gm.resolution = set.scale.maxCoeff() * std::sqrt(2.0) / (s - 1);
  return gm;
}

namespace {

std::vector<int> dependent_functions(const UncertainProblem& base) {
  if (static_cast<int>(base.phi_dependent.size()) != base.num_ineq + 1) {
    throw InvalidInput("uncertain problem: phi_dependent needs one flag per function");
  }
  std::vector<int> out;
  for (int i = 0; i <= base.num_ineq; ++i) {
    if (base.phi_dependent[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

NlpProblem build_nominal_nlp(const UncertainProblem& base) {
  NlpProblem p;
  p.n = base.n;
  p.num_ineq = base.num_ineq;
  p.ineq_names = base.ineq_names;
  p.evaluate = [base](const Vector& x, bool grads) {
    UncertainEval ue = base.evaluate(x, 0, grads);
    NlpEval ev;
    ev.f = ue.value[0];
    ev.g = ue.value.tail(base.num_ineq);
    if (grads) {
      ev.grad = ue.grad_x.row(0).transpose();
      ev.jac_g = ue.grad_x.bottomRows(base.num_ineq);
    }
    return ev;
  };
  return p;
}

int linear_robust_slack_count(const UncertainProblem& base, const UncertaintySet& set) {
  if (set.k != NormIndex::infinity) return 0;
  return static_cast<int>(dependent_functions(base).size()) * base.num_uncertain;
}

NlpProblem build_linear_robust_nlp(const UncertainProblem& base, const UncertaintySet& set) {
  set.validate();
  if (set.dimension() != base.num_uncertain) throw InvalidInput("uncertainty set dimension mismatch");
  const auto dep = dependent_functions(base);
  const int n = base.n;
  const int m = base.num_ineq;
  const int nphi = base.num_uncertain;
  const Vector d = set.scale;
  NlpProblem p;
  p.ineq_names = base.ineq_names;

  if (set.k == NormIndex::infinity) {
    const int ns = static_cast<int>(dep.size()) * nphi;
    p.n = n + ns;
    p.num_ineq = m + 2 * ns;
    for (int k = 0; k < static_cast<int>(dep.size()); ++k) {
      for (int j = 0; j < nphi; ++j) {
        std::string tag = "slack[g" + std::to_string(dep[k]) + ",phi" + std::to_string(j + 1) + "]";
        p.ineq_names.push_back(tag + " upper");
        p.ineq_names.push_back(tag + " lower");
      }
    }
    p.evaluate = [base, dep, d, n, m, nphi, ns](const Vector& z, bool grads) {
      Vector x = z.head(n);
      UncertainEval ue = base.evaluate(x, 1, grads);
      NlpEval ev;
      ev.g.resize(m + 2 * ns);
      ev.g.head(m) = ue.value.tail(m);
      ev.f = ue.value[0];
      if (grads) {
        ev.grad = Vector::Zero(n + ns);
        ev.grad.head(n) = ue.grad_x.row(0).transpose();
        ev.jac_g = Matrix::Zero(m + 2 * ns, n + ns);
        ev.jac_g.topLeftCorner(m, n) = ue.grad_x.bottomRows(m);
      }
      for (int k = 0; k < static_cast<int>(dep.size()); ++k) {
        const int i = dep[k];
        for (int j = 0; j < nphi; ++j) {
          const int col = n + k * nphi + j;
          const int row = m + 2 * (k * nphi + j);
          double zeta = z[col];
          double w = d[j] * ue.grad_phi(i, j);
          if (i == 0) {
            ev.f += zeta;
            if (grads) ev.grad[col] = 1.0;
          } else {
            ev.g[i - 1] += zeta;
            if (grads) ev.jac_g(i - 1, col) = 1.0;
          }
          ev.g[row] = w - zeta;
          ev.g[row + 1] = -w - zeta;
          if (grads) {
            ev.jac_g.block(row, 0, 1, n) = d[j] * ue.grad_phi_x[i].row(j);
            ev.jac_g.block(row + 1, 0, 1, n) = -d[j] * ue.grad_phi_x[i].row(j);
            ev.jac_g(row, col) = -1.0;
            ev.jac_g(row + 1, col) = -1.0;
          }
        }
      }
      return ev;
    };
    return p;
  }

  p.n = n;
  p.num_ineq = m;
  p.evaluate = [base, dep, d, n, m](const Vector& x, bool grads) {
    UncertainEval ue = base.evaluate(x, 1, grads);
    Vector val = ue.value;
    Matrix gx = grads ? ue.grad_x : Matrix();
    for (int i : dep) {
      Vector w = d.cwiseProduct(ue.grad_phi.row(i).transpose());
      double nw = w.norm();
      val[i] += nw;
      if (grads && nw > 0.0) gx.row(i) += (w.cwiseProduct(d)).transpose() * ue.grad_phi_x[i] / nw;
    }
    NlpEval ev;
    ev.f = val[0];
    ev.g = val.tail(m);
    if (grads) {
      ev.grad = gx.row(0).transpose();
      ev.jac_g = gx.bottomRows(m);
    }
    (void)n;
    return ev;
  };
  return p;
}

MpecLayout mpec_layout(const UncertainProblem& base) {
  MpecLayout l;
  l.n = base.n;
  l.nphi = base.num_uncertain;
  l.functions = dependent_functions(base);
  return l;
}

namespace {

// Largest eigenvalue of DHD with its unit eigenvector.
std::pair<double, Vector> top_eigen(const Matrix& h, const Vector& d) {
  Matrix s = d.asDiagonal() * h * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const int n = static_cast<int>(d.size());
  return {es.eigenvalues()[n - 1], es.eigenvectors().col(n - 1)};
}

}  // namespace

NlpProblem build_quadratic_robust_mpec(const UncertainProblem& base, const UncertaintySet& set, double tau) {
  set.validate();
  if (set.dimension() != base.num_uncertain) throw InvalidInput("uncertainty set dimension mismatch");
  if (!(tau >= 0.0)) throw InvalidInput("relaxation parameter must be nonnegative");
  const MpecLayout lay = mpec_layout(base);
  const int n = base.n;
  const int m = base.num_ineq;
  const int nphi = base.num_uncertain;
  const int nd = static_cast<int>(lay.functions.size());
  const Vector d = set.scale;
  const Vector dinv2 = d.cwiseProduct(d).cwiseInverse();

  // Inequality rows: the m original ones (model value for φ-dependent
  // g_i), then per dependent function: complementarity, ball, λ ≥ 0, PSD.
  NlpProblem p;
  p.n = lay.size();
  p.num_ineq = m + 4 * nd;
  p.num_eq = nd * nphi;
  p.ineq_names = base.ineq_names;
  for (int k = 0; k < nd; ++k) {
    std::string tag = "[g" + std::to_string(lay.functions[k]) + "]";
    for (const char* what : {"complementarity", "ball", "multiplier sign", "semidefinite"}) {
      p.ineq_names.push_back(std::string(what) + tag);
    }
    for (int j = 0; j < nphi; ++j) p.eq_names.push_back("stationarity" + tag + "[" + std::to_string(j + 1) + "]");
  }

  p.evaluate = [base, lay, n, m, nphi, nd, d, dinv2, tau](const Vector& z, bool grads) {
    const int nz = lay.size();
    Vector x = z.head(n);
    UncertainEval ue = base.evaluate(x, 2, grads);
    NlpEval ev;
    ev.f = ue.value[0];
    ev.g.resize(m + 4 * nd);
    ev.g.head(m) = ue.value.tail(m);
    ev.h.resize(nd * nphi);
    if (grads) {
      ev.grad = Vector::Zero(nz);
      ev.grad.head(n) = ue.grad_x.row(0).transpose();
      ev.jac_g = Matrix::Zero(m + 4 * nd, nz);
      ev.jac_g.topLeftCorner(m, n) = ue.grad_x.bottomRows(m);
      ev.jac_h = Matrix::Zero(nd * nphi, nz);
    }
    for (int k = 0; k < nd; ++k) {
      const int i = lay.functions[k];
      const int od = lay.delta_offset(k);
      const int ol = lay.lambda_offset(k);
      Vector delta = z.segment(od, nphi);
      double lambda = z[ol];
      Vector b = ue.grad_phi.row(i).transpose();
      const Matrix& h = ue.hess_phi[i];
      double model = b.dot(delta) + 0.5 * delta.dot(h * delta);
      double r2 = delta.dot(dinv2.cwiseProduct(delta));

      // Model value replaces g_i (or the objective).
      Vector mx;
      if (grads) {
        mx = ue.grad_phi_x[i].transpose() * delta;
        for (int c = 0; c < n; ++c) mx[c] += 0.5 * delta.dot(ue.hess_phi_x[i][c] * delta);
      }
      Vector md = b + h * delta;
      if (i == 0) {
        ev.f += model;
        if (grads) {
          ev.grad.head(n) += mx;
          ev.grad.segment(od, nphi) = md;
        }
      } else {
        ev.g[i - 1] += model;
        if (grads) {
          ev.jac_g.block(i - 1, 0, 1, n) += mx.transpose();
          ev.jac_g.block(i - 1, od, 1, nphi) = md.transpose();
        }
      }

      const int rc = m + 4 * k;
      ev.g[rc] = lambda * (1.0 - r2) - tau;
      ev.g[rc + 1] = r2 - 1.0;
      ev.g[rc + 2] = -lambda;
      auto [top, v] = top_eigen(h, d);
      ev.g[rc + 3] = top - lambda;

      Vector st = -b - h * delta + lambda * dinv2.cwiseProduct(delta);
      ev.h.segment(k * nphi, nphi) = st;

      if (grads) {
        Vector dr2 = 2.0 * dinv2.cwiseProduct(delta);
        ev.jac_g.block(rc, od, 1, nphi) = -lambda * dr2.transpose();
        ev.jac_g(rc, ol) = 1.0 - r2;
        ev.jac_g.block(rc + 1, od, 1, nphi) = dr2.transpose();
        ev.jac_g(rc + 2, ol) = -1.0;
        Vector dv = d.cwiseProduct(v);
        for (int c = 0; c < n; ++c) ev.jac_g(rc + 3, c) = dv.dot(ue.hess_phi_x[i][c] * dv);
        ev.jac_g(rc + 3, ol) = -1.0;

        for (int c = 0; c < n; ++c) {
          ev.jac_h.block(k * nphi, c, nphi, 1) = -ue.grad_phi_x[i].col(c) - ue.hess_phi_x[i][c] * delta;
        }
        Matrix sd = -h;
        sd.diagonal() += lambda * dinv2;
        ev.jac_h.block(k * nphi, od, nphi, nphi) = sd;
        ev.jac_h.block(k * nphi, ol, nphi, 1) = dinv2.cwiseProduct(delta);
      }
    }
    return ev;
  };
  return p;
}

MpecResult solve_quadratic_robust(const UncertainProblem& base, const UncertaintySet& set, const Vector& x0,
                                  const MpecOptions& opts) {
  set.validate();
  const MpecLayout lay = mpec_layout(base);
  const int nd = static_cast<int>(lay.functions.size());
  Vector z = Vector::Zero(lay.size());
  z.head(base.n) = x0;
  UncertainEval ue = base.evaluate(x0, 2, false);
  for (int k = 0; k < nd; ++k) {
    const int i = lay.functions[k];
    QuadraticWorstCaseModel qm{ue.value[i], ue.grad_phi.row(i).transpose(), ue.hess_phi[i]};
    auto tr = solve_trust_region_subproblem(qm, set.scale);
    z.segment(lay.delta_offset(k), lay.nphi) = tr.delta;
    // Start strictly inside the PSD constraint.
    auto [top, v] = top_eigen(ue.hess_phi[i], set.scale);
    (void)v;
    z[lay.lambda_offset(k)] = std::max(tr.lambda, top);
  }

  MpecResult res;
  for (double tau : opts.taus) {
    NlpProblem nlp = build_quadratic_robust_mpec(base, set, tau);
    OptResult r = solve_sqp(nlp, z, opts.sqp);
    if (!r.converged()) {
      SqpOptions relaxed = opts.sqp;
      relaxed.kkt_tol *= 100.0;
      OptResult retry = solve_sqp(nlp, z, relaxed);
      res.total_iterations += r.iterations;
      r = retry;
    }
    res.total_iterations += r.iterations;
    res.steps.push_back(r);
    res.final = r;
    if (!r.converged()) break;
    z = r.x;
  }
  const Vector& zf = res.final.x;
  res.x = zf.head(base.n);
  res.complementarity = 0.0;
  for (int k = 0; k < nd; ++k) {
    Vector delta = zf.segment(lay.delta_offset(k), lay.nphi);
    double lambda = zf[lay.lambda_offset(k)];
    res.delta.push_back(delta);
    res.lambda.push_back(lambda);
    double r2 = delta.cwiseQuotient(set.scale).squaredNorm();
    res.complementarity = std::max(res.complementarity, std::abs(lambda * (1.0 - r2)));
  }
  return res;
}

}  // namespace certrom
