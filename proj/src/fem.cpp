// SPDX-License-Identifier: Apache-2.0

#include "certrom/fem.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace certrom {

double Mesh::signed_area(int t) const {
  const auto& tri = triangles[t];
  const Point& a = nodes[tri[0]];
  const Point& b = nodes[tri[1]];
  const Point& c = nodes[tri[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

void Mesh::validate() const {
  if (labels.size() != triangles.size()) {
    throw InvalidInput("mesh: " + std::to_string(triangles.size()) + " triangles but " +
                       std::to_string(labels.size()) + " subdomain labels");
  }
  if (boundary.size() != nodes.size()) {
    throw InvalidInput("mesh: boundary flags do not cover all nodes");
  }
  for (int t = 0; t < num_triangles(); ++t) {
    for (int v : triangles[t]) {
      if (v < 0 || v >= num_nodes()) {
        throw InvalidInput("mesh: triangle " + std::to_string(t) + " references node " + std::to_string(v));
      }
    }
    if (!(signed_area(t) > 0.0)) {
      throw InvalidInput("mesh: triangle " + std::to_string(t) + " is degenerate or inverted");
    }
    if (labels[t] < 1 || labels[t] > num_subdomains) {
      throw InvalidInput("mesh: triangle " + std::to_string(t) + " has label " + std::to_string(labels[t]) +
                         " outside 1.." + std::to_string(num_subdomains));
    }
  }
  // Dirichlet nodes must lie on the outer boundary; a part of it may be left free.
  Mesh outer;
  outer.nodes = nodes;
  outer.triangles = triangles;
  outer.mark_outer_boundary();
  for (int i = 0; i < num_nodes(); ++i) {
    if (boundary[i] && !outer.boundary[i]) {
      throw InvalidInput("mesh: interior node " + std::to_string(i) + " is marked as boundary");
    }
  }
}

void Mesh::mark_outer_boundary() {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = tri[k];
      int b = tri[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  boundary.assign(nodes.size(), false);
  for (const auto& [edge, count] : edge_count) {
    if (count == 1) {
      boundary[edge.first] = true;
      boundary[edge.second] = true;
    }
  }
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "nodes " << mesh.num_nodes() << "\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    buf << i << ' ' << mesh.nodes[i].x() << ' ' << mesh.nodes[i].y() << ' ' << (mesh.boundary[i] ? 1 : 0) << "\n";
  }
  buf << "triangles " << mesh.num_triangles() << ' ' << mesh.num_subdomains << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    buf << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.labels[t] << "\n";
  }
  os << buf.str();
}

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  std::string tag;
  int n = 0;
  if (!(is >> tag >> n) || tag != "nodes" || n < 0) throw InvalidInput("mesh file: expected 'nodes <count>'");
  mesh.nodes.resize(n);
  mesh.boundary.resize(n);
  for (int i = 0; i < n; ++i) {
    int idx = 0;
    int flag = 0;
    double x = 0;
    double y = 0;
    if (!(is >> idx >> x >> y >> flag) || idx != i) {
      throw InvalidInput("mesh file: bad node record " + std::to_string(i));
    }
    mesh.nodes[i] = Point(x, y);
    mesh.boundary[i] = flag != 0;
  }
  int nt = 0;
  if (!(is >> tag >> nt >> mesh.num_subdomains) || tag != "triangles") {
    throw InvalidInput("mesh file: expected 'triangles <count> <subdomains>'");
  }
  mesh.triangles.resize(nt);
  mesh.labels.resize(nt);
  for (int t = 0; t < nt; ++t) {
    int idx = 0;
    auto& tri = mesh.triangles[t];
    if (!(is >> idx >> tri[0] >> tri[1] >> tri[2] >> mesh.labels[t]) || idx != t) {
      throw InvalidInput("mesh file: bad triangle record " + std::to_string(t));
    }
  }
  mesh.validate();
  return mesh;
}

DofMap::DofMap(const Mesh& mesh) : node_to_dof_(mesh.nodes.size(), -1) {
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    if (!mesh.boundary[i]) {
      node_to_dof_[i] = static_cast<int>(free_nodes_.size());
      free_nodes_.push_back(i);
    }
  }
}

Vector DofMap::prolong(const Vector& free) const {
  Vector full = Vector::Zero(num_nodes());
  for (int k = 0; k < num_free(); ++k) full[free_nodes_[k]] = free[k];
  return full;
}

namespace {

void check_label(const Mesh& mesh, int q) {
  if (q < 1 || q > mesh.num_subdomains) {
    throw InvalidInput("unknown subdomain label " + std::to_string(q));
  }
}

// Gradients of the three barycentric basis functions and the area.
double p1_gradients(const Mesh& mesh, int t, Eigen::Matrix<double, 2, 3>& grads) {
  const auto& tri = mesh.triangles[t];
  const Point& a = mesh.nodes[tri[0]];
  const Point& b = mesh.nodes[tri[1]];
  const Point& c = mesh.nodes[tri[2]];
  double area = mesh.signed_area(t);
  if (!(area > 0.0)) {
    throw InvalidInput("degenerate triangle " + std::to_string(t));
  }
  double inv = 1.0 / (2.0 * area);
  grads << (b.y() - c.y()) * inv, (c.y() - a.y()) * inv, (a.y() - b.y()) * inv,
           (c.x() - b.x()) * inv, (a.x() - c.x()) * inv, (b.x() - a.x()) * inv;
  return area;
}

SparseMatrix from_triplets(int n, std::vector<Eigen::Triplet<double>>& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

}  // namespace

SparseMatrix assemble_subdomain_stiffness(const Mesh& mesh, int q, const Eigen::Matrix2d& coeff) {
  check_label(mesh, q);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::Matrix<double, 2, 3> g;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.labels[t] != q) continue;
    double area = p1_gradients(mesh, t, g);
    Eigen::Matrix3d local = area * g.transpose() * coeff * g;
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], local(i, j));
    }
  }
  return from_triplets(mesh.num_nodes(), trips);
}

SparseMatrix assemble_subdomain_mass(const Mesh& mesh, int q) {
  check_label(mesh, q);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::Matrix<double, 2, 3> g;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.labels[t] != q) continue;
    double area = p1_gradients(mesh, t, g);
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
    }
  }
  return from_triplets(mesh.num_nodes(), trips);
}

Vector assemble_subdomain_gradient_load(const Mesh& mesh, int q, const Eigen::Vector2d& direction) {
  check_label(mesh, q);
  Vector load = Vector::Zero(mesh.num_nodes());
  Eigen::Matrix<double, 2, 3> g;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.labels[t] != q) continue;
    double area = p1_gradients(mesh, t, g);
    Eigen::Vector3d local = area * g.transpose() * direction;
    for (int i = 0; i < 3; ++i) load[mesh.triangles[t][i]] += local[i];
  }
  return load;
}

SparseMatrix restrict_to_free(const SparseMatrix& matrix, const DofMap& dofs) {
  if (matrix.rows() != dofs.num_nodes() || matrix.cols() != dofs.num_nodes()) {
    throw InvalidInput("restrict_to_free: matrix size does not match mesh");
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(matrix.nonZeros());
  for (int col = 0; col < matrix.outerSize(); ++col) {
    int dc = dofs.dof(col);
    if (dc < 0) continue;
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      int dr = dofs.dof(static_cast<int>(it.row()));
      if (dr >= 0) trips.emplace_back(dr, dc, it.value());
    }
  }
  return from_triplets(dofs.num_free(), trips);
}

Vector restrict_to_free(const Vector& v, const DofMap& dofs) {
  if (v.size() != dofs.num_nodes()) throw InvalidInput("restrict_to_free: vector size does not match mesh");
  Vector out(dofs.num_free());
  for (int k = 0; k < dofs.num_free(); ++k) out[k] = v[dofs.free_nodes()[k]];
  return out;
}

ReducedSystem apply_dirichlet(const SparseMatrix& matrix, const Vector& rhs, const Mesh& mesh) {
  if (matrix.rows() != mesh.num_nodes() || rhs.size() != mesh.num_nodes()) {
    throw InvalidInput("apply_dirichlet: system size " + std::to_string(matrix.rows()) + " does not match mesh with " +
                       std::to_string(mesh.num_nodes()) + " nodes");
  }
  DofMap dofs(mesh);
  return {restrict_to_free(matrix, dofs), restrict_to_free(rhs, dofs)};
}

SpdFactorization::SpdFactorization(const SparseMatrix& matrix)
    : matrix_(matrix), ldlt_(std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>()) {
  if (matrix.rows() != matrix.cols()) throw InvalidInput("factorization of a non-square matrix");
  if (matrix.rows() == 0) return;
  ldlt_->compute(matrix_);
  if (ldlt_->info() != Eigen::Success) throw NumericalError("sparse LDLT factorization failed");
  if ((ldlt_->vectorD().array() <= 0.0).any()) {
    throw NumericalError("matrix is not positive definite (nonpositive pivot in LDLT)");
  }
}

Vector SpdFactorization::solve(const Vector& rhs, double tol) const {
  if (rhs.size() != matrix_.rows()) throw InvalidInput("solve: right-hand side has wrong length");
  if (rhs.size() == 0) return rhs;
  double bnorm = rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(rhs.size());
  Vector x = ldlt_->solve(rhs);
  double res = (rhs - matrix_ * x).norm() / bnorm;
  // A couple of refinement sweeps recover accuracy on badly scaled systems.
  for (int sweep = 0; sweep < 3 && res > tol; ++sweep) {
    x += ldlt_->solve(rhs - matrix_ * x);
    res = (rhs - matrix_ * x).norm() / bnorm;
  }
  if (!std::isfinite(res) || res > tol) {
    std::ostringstream msg;
    msg << "sparse solve did not reach tolerance " << tol << " (relative residual " << res << ")";
    throw NumericalError(msg.str());
  }
  return x;
}

Vector solve_sparse(const SparseMatrix& matrix, const Vector& rhs, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("solve_sparse: tolerance must be positive");
  return SpdFactorization(matrix).solve(rhs, tol);
}

double max_abs_asymmetry(const SparseMatrix& matrix) {
  SparseMatrix diff = SparseMatrix(matrix.transpose()) - matrix;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

double smallest_generalized_eigenvalue(const SparseMatrix& a, const SparseMatrix& b, double rel_tol) {
  const int n = static_cast<int>(a.rows());
  if (n == 0 || a.cols() != n || b.rows() != n || b.cols() != n) {
    throw InvalidInput("smallest_generalized_eigenvalue: incompatible or empty matrices");
  }
  if (n <= 64) {
    Matrix da(a), db(b);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(da, db, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed");
    return es.eigenvalues()[0];
  }

  // Shift until A + σB is positive definite, then run subspace inverse
  // iteration with Rayleigh-Ritz on the shifted pencil.
  double scale = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  }
  double bscale = 0.0;
  for (int k = 0; k < b.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(b, k); it; ++it) bscale = std::max(bscale, std::abs(it.value()));
  }
  double shift = 0.0;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  for (int attempt = 0;; ++attempt) {
    SparseMatrix shifted = a + shift * b;
    solver.compute(shifted);
    if (solver.info() == Eigen::Success && (solver.vectorD().array() > 0.0).all()) break;
    if (attempt > 60) throw NumericalError("smallest_generalized_eigenvalue: could not find a definite shift");
    shift = shift == 0.0 ? 1e-8 * scale / std::max(bscale, 1e-300) : 4.0 * shift;
  }

  const int block = std::min(n, 8);
  std::mt19937 gen(12345);
  std::normal_distribution<double> normal;
  Matrix x(n, block);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < block; ++j) x(i, j) = normal(gen);
  }
  double lambda = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 2000; ++iter) {
    Matrix y = solver.solve(b * x);
    Eigen::HouseholderQR<Matrix> qr(y);
    y = qr.householderQ() * Matrix::Identity(n, block);
    Matrix ay = a * y;
    Matrix by = b * y;
    Matrix ah = y.transpose() * ay;
    Matrix bh = y.transpose() * by;
    ah = 0.5 * (ah + ah.transpose());
    bh = 0.5 * (bh + bh.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(ah, bh);
    if (es.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz step failed");
    x = y * es.eigenvectors();
    double next = es.eigenvalues()[0];
    Vector v = x.col(0);
    Vector r = a * v - next * (b * v);
    double bnorm = std::sqrt(v.dot(b * v));
    double resid = r.norm() / (std::abs(next) * (b * v).norm() + 1e-300);
    bool settled = std::abs(next - lambda) <= rel_tol * std::abs(next) * 0.1;
    lambda = next;
    if (settled && resid <= std::sqrt(rel_tol) && bnorm > 0.0) return lambda;
  }
  throw NumericalError("smallest_generalized_eigenvalue: subspace iteration did not converge (last estimate " +
                       std::to_string(lambda) + ")");
}

}  // namespace certrom
