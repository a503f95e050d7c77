// SPDX-License-Identifier: Apache-2.0

#include "certrom/sqp.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Eigenvalues>

namespace certrom {

std::string to_string(SqpStatus s) {
  switch (s) {
    case SqpStatus::converged: return "converged";
    case SqpStatus::max_iterations: return "max_iterations";
    case SqpStatus::line_search_failed: return "line_search_failed";
    case SqpStatus::qp_failed: return "qp_failed";
  }
  return "unknown";
}

double constraint_violation(const NlpEval& ev) {
  double v = 0.0;
  if (ev.g.size() > 0) v = std::max(v, ev.g.maxCoeff());
  if (ev.h.size() > 0) v = std::max(v, ev.h.lpNorm<Eigen::Infinity>());
  return v;
}

double kkt_residual(const NlpEval& ev, const Vector& lambda_ineq, const Vector& lambda_eq) {
  Vector gl = ev.grad;
  if (ev.g.size() > 0) gl += ev.jac_g.transpose() * lambda_ineq;
  if (ev.h.size() > 0) gl += ev.jac_h.transpose() * lambda_eq;
  double r = std::max(gl.lpNorm<Eigen::Infinity>(), constraint_violation(ev));
  for (Eigen::Index i = 0; i < ev.g.size(); ++i) {
    r = std::max({r, -lambda_ineq[i], std::abs(lambda_ineq[i] * ev.g[i])});
  }
  return r;
}

namespace {

double l1_violation(const NlpEval& ev) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < ev.g.size(); ++i) v += std::max(0.0, ev.g[i]);
  if (ev.h.size() > 0) v += ev.h.lpNorm<1>();
  return v;
}

double merit(const NlpEval& ev, double mu) { return ev.f + mu * l1_violation(ev); }

struct Step {
  Vector d;
  Vector lambda;
  Vector lambda_eq;
};

// Quadratic model subproblem; constraint constants may be overridden for
// the second-order correction.
Step solve_subproblem(const Matrix& b, const NlpEval& ev, const Vector& g_const, const Vector& h_const,
                      double elastic_weight) {
  QpProblem qp;
  qp.h = b;
  qp.c = ev.grad;
  qp.a = ev.jac_g;
  qp.b = -g_const;
  qp.a_eq = ev.jac_h;
  qp.b_eq = -h_const;
  if (qp.a.rows() == 0) qp.a.resize(0, b.rows());
  if (qp.a_eq.rows() == 0) qp.a_eq.resize(0, b.rows());
  try {
    auto r = solve_qp(qp);
    return {r.x, r.lambda, r.lambda_eq};
  } catch (const QpInfeasible&) {
  }
  // Elastic mode: (d, t, s⁺, s⁻) with g + Jd ≤ t, h + J_h d = s⁺ − s⁻.
  const int n = static_cast<int>(b.rows());
  const int mi = static_cast<int>(g_const.size());
  const int me = static_cast<int>(h_const.size());
  const int ne = n + mi + 2 * me;
  QpProblem el;
  el.h = Matrix::Zero(ne, ne);
  el.h.topLeftCorner(n, n) = b;
  el.h.bottomRightCorner(ne - n, ne - n) = 1e-8 * Matrix::Identity(ne - n, ne - n);
  el.c = Vector::Constant(ne, elastic_weight);
  el.c.head(n) = ev.grad;
  el.a = Matrix::Zero(2 * mi + 2 * me, ne);
  el.b = Vector::Zero(2 * mi + 2 * me);
  if (mi > 0) {
    el.a.block(0, 0, mi, n) = ev.jac_g;
    el.a.block(0, n, mi, mi) = -Matrix::Identity(mi, mi);
    el.b.head(mi) = -g_const;
    el.a.block(mi, n, mi, mi) = -Matrix::Identity(mi, mi);
  }
  if (me > 0) el.a.block(2 * mi, n + mi, 2 * me, 2 * me) = -Matrix::Identity(2 * me, 2 * me);
  el.a_eq = Matrix::Zero(me, ne);
  el.b_eq = -h_const;
  if (me > 0) {
    el.a_eq.block(0, 0, me, n) = ev.jac_h;
    el.a_eq.block(0, n + mi, me, me) = -Matrix::Identity(me, me);
    el.a_eq.block(0, n + mi + me, me, me) = Matrix::Identity(me, me);
  }
  auto r = solve_qp(el);
  return {r.x.head(n), r.lambda.head(mi), r.lambda_eq};
}

std::optional<NlpEval> try_evaluate(const NlpProblem& p, const Vector& x, bool grads, int& count) {
  ++count;
  try {
    NlpEval ev = p.evaluate(x, grads);
    if (!std::isfinite(ev.f) || !ev.g.allFinite() || !ev.h.allFinite()) return std::nullopt;
    return ev;
  } catch (const InvalidInput&) {
    return std::nullopt;
  }
}

void check_sizes(const NlpProblem& p, const NlpEval& ev, bool grads) {
  if (ev.g.size() != p.num_ineq || ev.h.size() != p.num_eq) throw InvalidInput("NLP: constraint count mismatch");
  if (!grads) return;
  if (ev.grad.size() != p.n || ev.jac_g.rows() != p.num_ineq || ev.jac_h.rows() != p.num_eq ||
      (p.num_ineq > 0 && ev.jac_g.cols() != p.n) || (p.num_eq > 0 && ev.jac_h.cols() != p.n)) {
    throw InvalidInput("NLP: derivative dimensions mismatch");
  }
}

Vector lagrangian_gradient(const NlpEval& ev, const Vector& li, const Vector& le) {
  Vector g = ev.grad;
  if (ev.g.size() > 0) g += ev.jac_g.transpose() * li;
  if (ev.h.size() > 0) g += ev.jac_h.transpose() * le;
  return g;
}

}  // namespace

OptResult solve_sqp(const NlpProblem& problem, const Vector& x0, const SqpOptions& opts) {
  if (x0.size() != problem.n) throw InvalidInput("SQP: starting point has wrong dimension");
  if (!x0.allFinite()) throw InvalidInput("SQP: starting point is not finite");
  OptResult res;
  Vector x = x0;
  NlpEval ev = problem.evaluate(x, true);
  ++res.evaluations;
  check_sizes(problem, ev, true);
  const int n = problem.n;
  Matrix b = Matrix::Identity(n, n);
  double mu = opts.penalty_initial;
  res.lambda_ineq = Vector::Zero(problem.num_ineq);
  res.lambda_eq = Vector::Zero(problem.num_eq);

  auto finish = [&](SqpStatus status, int iter) {
    res.x = x;
    res.objective = ev.f;
    res.violation = constraint_violation(ev);
    res.kkt = kkt_residual(ev, res.lambda_ineq, res.lambda_eq);
    res.iterations = iter;
    res.status = status;
    return res;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Step st;
    try {
      st = solve_subproblem(b, ev, ev.g, ev.h, opts.elastic_weight);
    } catch (const NumericalError&) {
      return finish(SqpStatus::qp_failed, iter);
    }
    double kkt = kkt_residual(ev, st.lambda, st.lambda_eq);
    if (kkt <= opts.kkt_tol) {
      res.lambda_ineq = st.lambda;
      res.lambda_eq = st.lambda_eq;
      res.history.push_back({iter, ev.f, constraint_violation(ev), kkt, 0.0, res.evaluations});
      return finish(SqpStatus::converged, iter);
    }
    double lmax = 0.0;
    if (st.lambda.size() > 0) lmax = st.lambda.lpNorm<Eigen::Infinity>();
    if (st.lambda_eq.size() > 0) lmax = std::max(lmax, st.lambda_eq.lpNorm<Eigen::Infinity>());
    mu = std::max(mu, opts.penalty_margin * lmax + opts.penalty_offset);

    const double phi0 = merit(ev, mu);
    // Merit differences below rounding level cannot be resolved.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi0));
    double slope = ev.grad.dot(st.d) - mu * l1_violation(ev);
    if (slope >= 0.0) slope = -st.d.dot(b * st.d);

    double alpha = opts.armijo_initial;
    std::optional<NlpEval> trial;
    Vector x_new;
    bool accepted = false;
    for (int bt = 0; bt <= opts.armijo_max_backtracks; ++bt) {
      x_new = x + alpha * st.d;
      trial = try_evaluate(problem, x_new, false, res.evaluations);
      if (trial && merit(*trial, mu) <= phi0 + opts.armijo_slope * alpha * slope + noise) {
        accepted = true;
        break;
      }
      if (bt == 0 && trial && opts.second_order_correction) {
        Vector gc = problem.num_ineq > 0 ? Vector(trial->g - ev.jac_g * st.d) : Vector();
        Vector hc = problem.num_eq > 0 ? Vector(trial->h - ev.jac_h * st.d) : Vector();
        try {
          Step soc = solve_subproblem(b, ev, gc, hc, opts.elastic_weight);
          Vector xs = x + soc.d;
          auto ts = try_evaluate(problem, xs, false, res.evaluations);
          if (ts && merit(*ts, mu) <= phi0 + opts.armijo_slope * slope + noise) {
            x_new = xs;
            trial = ts;
            accepted = true;
            break;
          }
        } catch (const NumericalError&) {
        }
      }
      alpha *= opts.armijo_factor;
    }
    if (accepted && opts.line_search_interpolation) {
      const double curv = (merit(*trial, mu) - phi0 - slope * alpha) / (alpha * alpha);
      if (curv > 0.0) {
        const double a_star = -slope / (2.0 * curv);
        if (a_star > 0.0 && std::abs(a_star - alpha) > 1e-8 * alpha) {
          Vector xi = x + a_star * st.d;
          auto ti = try_evaluate(problem, xi, false, res.evaluations);
          if (ti && merit(*ti, mu) < merit(*trial, mu)) {
            x_new = xi;
            trial = ti;
          }
        }
      }
    }
    if (!accepted) {
      res.lambda_ineq = st.lambda;
      res.lambda_eq = st.lambda_eq;
      return finish(SqpStatus::line_search_failed, iter);
    }

    NlpEval ev_new = problem.evaluate(x_new, true);
    ++res.evaluations;
    check_sizes(problem, ev_new, true);

    Vector s = x_new - x;
    Vector y = lagrangian_gradient(ev_new, st.lambda, st.lambda_eq) - lagrangian_gradient(ev, st.lambda, st.lambda_eq);
    Vector bs = b * s;
    double sbs = s.dot(bs);
    double sy = s.dot(y);
    if (sbs > 0.0) {
      if (sy < opts.bfgs_damping * sbs) {
        double theta = (1.0 - opts.bfgs_damping) * sbs / (sbs - sy);
        y = theta * y + (1.0 - theta) * bs;
        sy = s.dot(y);
      }
      if (sy > 0.0) {
        b += y * y.transpose() / sy - bs * bs.transpose() / sbs;
        b = 0.5 * (b + b.transpose()).eval();
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < opts.bfgs_min_eig || es.eigenvalues().maxCoeff() > opts.bfgs_max_eig) {
        b = Matrix::Identity(n, n);
      }
    }

    x = x_new;
    ev = std::move(ev_new);
    res.lambda_ineq = st.lambda;
    res.lambda_eq = st.lambda_eq;
    res.history.push_back({iter, ev.f, constraint_violation(ev), kkt, s.lpNorm<Eigen::Infinity>(), res.evaluations});
  }
  return finish(SqpStatus::max_iterations, opts.max_iter);
}

}  // namespace certrom
