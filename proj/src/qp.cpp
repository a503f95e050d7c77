// SPDX-License-Identifier: Apache-2.0

#include "certrom/qp.hpp"

#include <cmath>
#include <limits>

namespace certrom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working factors of the active set: J = L⁻ᵀQ and the upper triangular R
// with N_active = Q [R; 0] in the metric of H.
struct ActiveFactors {
  Matrix j;
  Matrix r;
  double r_norm = 1.0;
  int iq = 0;

  bool add(Vector& d) {
    const int n = static_cast<int>(d.size());
    for (int k = n - 1; k > iq; --k) {
      double cc = d[k - 1];
      double ss = d[k];
      double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[k] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[k - 1] = -h;
      } else {
        d[k - 1] = h;
      }
      double xny = ss / (1.0 + cc);
      for (int m = 0; m < n; ++m) {
        double t1 = j(m, k - 1);
        double t2 = j(m, k);
        j(m, k - 1) = t1 * cc + t2 * ss;
        j(m, k) = xny * (t1 + j(m, k - 1)) - t2;
      }
    }
    ++iq;
    r.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d[iq - 1]) <= std::numeric_limits<double>::epsilon() * r_norm) return false;
    r_norm = std::max(r_norm, std::abs(d[iq - 1]));
    return true;
  }

  // Removes active position qq; `ids` and `u` are shifted along (they carry
  // one extra trailing slot for the constraint being added).
  void remove(int qq, std::vector<int>& ids, Vector& u) {
    const int n = static_cast<int>(j.rows());
    for (int i = qq; i < iq - 1; ++i) {
      ids[i] = ids[i + 1];
      u[i] = u[i + 1];
      r.col(i) = r.col(i + 1);
    }
    ids[iq - 1] = ids[iq];
    u[iq - 1] = u[iq];
    ids[iq] = -1;
    u[iq] = 0.0;
    r.col(iq - 1).setZero();
    --iq;
    for (int k = qq; k < iq; ++k) {
      double cc = r(k, k);
      double ss = r(k + 1, k);
      double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r(k + 1, k) = 0.0;
      if (cc < 0.0) {
        r(k, k) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r(k, k) = h;
      }
      double xny = ss / (1.0 + cc);
      for (int m = k + 1; m < iq; ++m) {
        double t1 = r(k, m);
        double t2 = r(k + 1, m);
        r(k, m) = t1 * cc + t2 * ss;
        r(k + 1, m) = xny * (t1 + r(k, m)) - t2;
      }
      for (int m = 0; m < n; ++m) {
        double t1 = j(m, k);
        double t2 = j(m, k + 1);
        j(m, k) = t1 * cc + t2 * ss;
        j(m, k + 1) = xny * (j(m, k) + t1) - t2;
      }
    }
  }

  // z: primal step in the null space; rr: change of the active multipliers.
  void directions(const Vector& np, Vector& d, Vector& z, Vector& rr) const {
    const int n = static_cast<int>(j.rows());
    d = j.transpose() * np;
    z = j.rightCols(n - iq) * d.tail(n - iq);
    rr = r.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
  }
};

}  // namespace

QpResult solve_qp(const QpProblem& qp) {
  const int n = static_cast<int>(qp.h.rows());
  const int me = static_cast<int>(qp.a_eq.rows());
  const int mi = static_cast<int>(qp.a.rows());
  if (qp.h.cols() != n || qp.c.size() != n) throw InvalidInput("QP: H and c sizes differ");
  if ((me > 0 && qp.a_eq.cols() != n) || qp.b_eq.size() != me) throw InvalidInput("QP: equality block size mismatch");
  if ((mi > 0 && qp.a.cols() != n) || qp.b.size() != mi) throw InvalidInput("QP: inequality block size mismatch");
  if (me > n) throw QpInfeasible("QP: more equality constraints than variables");

  Eigen::LLT<Matrix> llt(0.5 * (qp.h + qp.h.transpose()));
  if (llt.info() != Eigen::Success) throw InvalidInput("QP: Hessian is not positive definite");
  Matrix l = llt.matrixL();

  ActiveFactors af;
  af.j = l.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
  af.r = Matrix::Zero(n, n);
  const double c1 = qp.h.trace();
  const double c2 = af.j.trace();

  QpResult res;
  res.x = -llt.solve(qp.c);
  Vector u = Vector::Zero(n + 1);
  std::vector<int> ids(n + 1, -1);  // equality k stored as -(k+1), inequality i as i
  Vector d(n), z(n), rr;

  for (int k = 0; k < me; ++k) {
    Vector np = qp.a_eq.row(k).transpose();
    af.directions(np, d, z, rr);
    double t2 = 0.0;
    double zn = z.dot(np);
    if (std::abs(zn) > std::numeric_limits<double>::epsilon() * std::max(1.0, np.norm())) {
      t2 = (qp.b_eq[k] - np.dot(res.x)) / zn;
    }
    res.x += t2 * z;
    u.head(af.iq) -= t2 * rr;
    u[af.iq] = t2;
    ids[af.iq] = -(k + 1);
    if (!af.add(d)) throw QpInfeasible("QP: equality constraints are linearly dependent");
  }

  // Inequalities as n_iᵀx + b_i ≥ 0 with n_i = -a_i.
  auto slack = [&](int i) { return qp.b[i] - qp.a.row(i).dot(res.x); };
  std::vector<char> active(mi, 0);
  const double tol = std::numeric_limits<double>::epsilon() * c1 * c2 * 100.0;
  const int max_iter = 50 * (n + mi + 10);
  int iter = 0;

  while (true) {
    if (++iter > max_iter) throw NumericalError("QP: iteration limit reached");
    std::vector<char> excluded(mi, 0);
    Vector u_old = u;
    std::vector<int> ids_old = ids;
    Vector x_old = res.x;
    int iq_old = af.iq;
    Matrix j_old = af.j, r_old = af.r;
    double rn_old = af.r_norm;
    std::vector<char> active_old = active;

  choose:
    int ip = -1;
    double worst = 0.0;
    double psi = 0.0;
    for (int i = 0; i < mi; ++i) {
      if (active[i]) continue;
      double s = slack(i);
      psi += std::min(0.0, s);
      if (excluded[i]) continue;
      if (s < worst) {
        worst = s;
        ip = i;
      }
    }
    if (ip < 0 || std::abs(psi) <= mi * tol) break;
    Vector np = -qp.a.row(ip).transpose();
    u[af.iq] = 0.0;
    ids[af.iq] = ip;

    while (true) {
      af.directions(np, d, z, rr);
      int drop = -1;
      double t1 = kInf;
      for (int k = 0; k < af.iq; ++k) {
        if (ids[k] < 0) continue;  // equalities never leave
        if (rr[k] > 0.0 && u[k] / rr[k] < t1) {
          t1 = u[k] / rr[k];
          drop = k;
        }
      }
      double zn = z.dot(np);
      // Full step zeroes the constraint value nᵀx + b (= slack).
      double t2 = z.squaredNorm() > std::numeric_limits<double>::epsilon() ? -slack(ip) / zn : kInf;
      double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw QpInfeasible("QP: constraints are infeasible");
      if (!std::isfinite(t2)) {
        u.head(af.iq) -= t * rr;
        u[af.iq] += t;
        active[ids[drop]] = 0;
        af.remove(drop, ids, u);
        continue;
      }
      res.x += t * z;
      u.head(af.iq) -= t * rr;
      u[af.iq] += t;
      if (t == t2) {
        if (!af.add(d)) {
          // Dependent on the active set: restore and try another violated row.
          excluded[ip] = 1;
          u = u_old;
          ids = ids_old;
          res.x = x_old;
          af.iq = iq_old;
          af.j = j_old;
          af.r = r_old;
          af.r_norm = rn_old;
          active = active_old;
          goto choose;
        }
        active[ip] = 1;
        break;
      }
      active[ids[drop]] = 0;
      af.remove(drop, ids, u);
    }
  }

  res.iterations = iter;
  res.lambda_eq = Vector::Zero(me);
  res.lambda = Vector::Zero(mi);
  for (int k = 0; k < af.iq; ++k) {
    if (ids[k] < 0) {
      res.lambda_eq[-ids[k] - 1] = -u[k];
    } else {
      res.lambda[ids[k]] = u[k];
      res.active.push_back(ids[k]);
    }
  }
  res.objective = 0.5 * res.x.dot(qp.h * res.x) + qp.c.dot(res.x);
  return res;
}

double qp_kkt_error(const QpProblem& qp, const QpResult& r) {
  Vector grad = qp.h * r.x + qp.c;
  if (qp.a_eq.rows() > 0) grad += qp.a_eq.transpose() * r.lambda_eq;
  if (qp.a.rows() > 0) grad += qp.a.transpose() * r.lambda;
  double err = grad.lpNorm<Eigen::Infinity>();
  if (qp.a_eq.rows() > 0) err = std::max(err, (qp.a_eq * r.x - qp.b_eq).lpNorm<Eigen::Infinity>());
  for (int i = 0; i < qp.a.rows(); ++i) {
    double s = qp.b[i] - qp.a.row(i).dot(r.x);
    err = std::max({err, -s, -r.lambda[i], std::abs(r.lambda[i] * s)});
  }
  return err;
}

}  // namespace certrom
