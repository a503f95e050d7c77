// SPDX-License-Identifier: Apache-2.0

#include "certrom/benchmark.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <type_traits>

namespace certrom {

namespace {

// Frame triangles as indices into the twelve control points
// (0..7 fixed frame points counter-clockwise from the origin, 8..11 magnet
// corners a, b, c, d counter-clockwise from bottom-left).
constexpr std::array<std::array<int, 3>, kFramePieces> kPieces{{
    {0, 1, 8}, {1, 9, 8}, {1, 2, 9},     // below the magnet
    {2, 3, 9}, {3, 10, 9}, {3, 4, 10},   // right
    {4, 5, 10}, {5, 11, 10}, {5, 6, 11}, // above
    {6, 7, 11}, {7, 8, 11}, {7, 0, 8},   // left
}};

template <class S>
using Elem = std::remove_const_t<S>;

constexpr double kDegree = std::numbers::pi / 180.0;

}  // namespace

BenchmarkGeometry::BenchmarkGeometry(const BenchmarkConfig& config) : config_(config) {
  const auto& r = config_.reference;
  if (!(config_.width > 0 && config_.frame_height > 0 && config_.layer_height > 0)) {
    throw InvalidInput("benchmark: frame dimensions must be positive");
  }
  if (config_.subdivisions < 1) throw InvalidInput("benchmark: subdivisions must be at least 1");
  if (!(r[0] > 0 && r[1] > 0 && r[2] > 0)) throw InvalidInput("benchmark: reference magnet must have positive size");
  if (r[0] >= config_.width) throw InvalidInput("benchmark: reference magnet width exceeds the frame");
  if (r[1] + r[2] >= config_.frame_height) {
    throw InvalidInput("benchmark: reference magnet height + offset exceeds the frame height");
  }
}

template <class T>
std::array<std::array<T, 2>, 12> BenchmarkGeometry::control_points(std::span<const T> p) const {
  const double w = config_.width;
  const double h = config_.frame_height;
  auto c = [](double v) { return T(v); };
  T half = p[0] * 0.5;
  T left = c(0.5 * w) - half;
  T right = c(0.5 * w) + half;
  T bottom = p[2];
  T top = p[2] + p[1];
  return {{
      {c(0), c(0)}, {c(0.5 * w), c(0)}, {c(w), c(0)}, {c(w), c(0.5 * h)},
      {c(w), c(h)}, {c(0.5 * w), c(h)}, {c(0), c(h)}, {c(0), c(0.5 * h)},
      {left, bottom}, {right, bottom}, {right, top}, {left, top},
  }};
}

template <class T>
std::array<T, 3> BenchmarkGeometry::piece_tensor(int piece, std::span<const T> p) const {
  const auto& idx = kPieces.at(piece);
  auto cur = control_points<T>(p);
  const auto& rp = config_.reference;
  std::array<double, 3> rv{rp[0], rp[1], rp[2]};
  auto ref = control_points<double>(std::span<const double>(rv));
  // R = [r1 - r0, r2 - r0]; J = C R⁻¹ with C = [c1 - c0, c2 - c0].
  double r00 = ref[idx[1]][0] - ref[idx[0]][0];
  double r10 = ref[idx[1]][1] - ref[idx[0]][1];
  double r01 = ref[idx[2]][0] - ref[idx[0]][0];
  double r11 = ref[idx[2]][1] - ref[idx[0]][1];
  double rdet = r00 * r11 - r01 * r10;
  double i00 = r11 / rdet, i01 = -r01 / rdet, i10 = -r10 / rdet, i11 = r00 / rdet;
  T c00 = cur[idx[1]][0] - cur[idx[0]][0];
  T c10 = cur[idx[1]][1] - cur[idx[0]][1];
  T c01 = cur[idx[2]][0] - cur[idx[0]][0];
  T c11 = cur[idx[2]][1] - cur[idx[0]][1];
  T j00 = c00 * i00 + c01 * i10;
  T j01 = c00 * i01 + c01 * i11;
  T j10 = c10 * i00 + c11 * i10;
  T j11 = c10 * i01 + c11 * i11;
  T det = j00 * j11 - j01 * j10;
  // |det J| J⁻¹ J⁻ᵀ = adj(J) adj(J)ᵀ / det J
  return {(j11 * j11 + j01 * j01) / det, -(j11 * j10 + j01 * j00) / det, (j10 * j10 + j00 * j00) / det};
}

std::array<std::array<Point, 3>, kFramePieces> BenchmarkGeometry::frame_triangles(std::span<const double> p) const {
  auto cp = control_points<double>(p);
  std::array<std::array<Point, 3>, kFramePieces> out;
  for (int q = 0; q < kFramePieces; ++q) {
    for (int k = 0; k < 3; ++k) out[q][k] = Point(cp[kPieces[q][k]][0], cp[kPieces[q][k]][1]);
  }
  return out;
}

Point BenchmarkGeometry::map_point(int label, const Point& x, std::span<const double> p) const {
  const auto& r = config_.reference;
  if (label >= 1 && label <= kFramePieces) {
    std::array<double, 3> rv{r[0], r[1], r[2]};
    auto ref = frame_triangles(rv)[label - 1];
    auto cur = frame_triangles(p)[label - 1];
    Eigen::Matrix2d rm, cm;
    rm << ref[1] - ref[0], ref[2] - ref[0];
    cm << cur[1] - cur[0], cur[2] - cur[0];
    return cur[0] + cm * rm.inverse() * (x - ref[0]);
  }
  if (label == kMagnetLabel) {
    double cx = 0.5 * config_.width;
    return Point(cx + (x.x() - cx) * p[0] / r[0], p[2] + (x.y() - r[2]) * p[1] / r[1]);
  }
  if (label == kLayerLabel) return x;
  throw InvalidInput("benchmark: unknown subdomain label " + std::to_string(label));
}

std::array<double, 4> BenchmarkGeometry::magnet_box(std::span<const double> p) const {
  double cx = 0.5 * config_.width;
  return {cx - 0.5 * p[0], p[2], cx + 0.5 * p[0], p[2] + p[1]};
}

namespace {

class MeshBuilder {
 public:
  int node(const Point& x) {
    auto key = std::make_pair(std::llround(x.x() * 1e8), std::llround(x.y() * 1e8));
    auto [it, inserted] = index_.emplace(key, static_cast<int>(mesh_.nodes.size()));
    if (inserted) mesh_.nodes.push_back(x);
    return it->second;
  }

  void triangle(int a, int b, int c, int label) {
    mesh_.triangles.push_back({a, b, c});
    mesh_.labels.push_back(label);
  }

  void refine_triangle(const std::array<Point, 3>& v, int n, int label) {
    auto at = [&](int i, int j) {
      return node(v[0] + (static_cast<double>(i) / n) * (v[1] - v[0]) + (static_cast<double>(j) / n) * (v[2] - v[0]));
    };
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i + j < n; ++i) {
        triangle(at(i, j), at(i + 1, j), at(i, j + 1), label);
        if (i + j + 2 <= n) triangle(at(i + 1, j), at(i + 1, j + 1), at(i, j + 1), label);
      }
    }
  }

  void rectangle(double x0, double y0, double x1, double y1, int nx, int ny, int label) {
    auto at = [&](int i, int j) {
      return node(Point(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny));
    };
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        triangle(at(i, j), at(i + 1, j), at(i + 1, j + 1), label);
        triangle(at(i, j), at(i + 1, j + 1), at(i, j + 1), label);
      }
    }
  }

  Mesh finish(int num_subdomains) {
    mesh_.num_subdomains = num_subdomains;
    mesh_.mark_outer_boundary();
    mesh_.validate();
    return std::move(mesh_);
  }

 private:
  Mesh mesh_;
  std::map<std::pair<long long, long long>, int> index_;
};

}  // namespace

Mesh build_reference_mesh(const BenchmarkConfig& config) {
  BenchmarkGeometry geom(config);
  const int n = config.subdivisions;
  std::array<double, 3> ref{config.reference[0], config.reference[1], config.reference[2]};
  MeshBuilder mb;
  auto tris = geom.frame_triangles(ref);
  for (int q = 0; q < kFramePieces; ++q) mb.refine_triangle(tris[q], n, q + 1);
  auto box = geom.magnet_box(ref);
  mb.rectangle(box[0], box[1], box[2], box[3], n, n, kMagnetLabel);
  const double w = config.width;
  const double h = config.frame_height;
  int ny = std::max(1, static_cast<int>(std::lround(n * config.layer_height / (0.5 * w))));
  mb.rectangle(0.0, h, 0.5 * w, h + config.layer_height, n, ny, kLayerLabel);
  mb.rectangle(0.5 * w, h, w, h + config.layer_height, n, ny, kLayerLabel);
  return mb.finish(kLayerLabel);
}

Mesh mapped_mesh(const Benchmark& bench, std::span<const double> p) {
  bench.model.check_admissible(p);
  Mesh out = bench.mesh;
  std::vector<char> done(out.nodes.size(), 0);
  for (std::size_t t = 0; t < out.triangles.size(); ++t) {
    for (int v : out.triangles[t]) {
      if (done[v]) continue;
      out.nodes[v] = bench.geometry.map_point(out.labels[t], bench.mesh.nodes[v], p);
      done[v] = 1;
    }
  }
  out.validate();
  return out;
}

Benchmark build_benchmark(const BenchmarkConfig& config) {
  BenchmarkGeometry geom(config);
  Mesh mesh = build_reference_mesh(config);
  DofMap dofs(mesh);
  const auto ref = config.reference;

  AffineModel model;
  model.num_design = 3;
  model.num_uncertain = 1;
  model.reference = {ref[0], ref[1], ref[2]};
  model.design_names = {"p1 (magnet width)", "p2 (magnet height)", "p3 (magnet offset)"};
  model.uncertain_names = {"phi (field angle, degrees)"};
  model.lower = {0.5, 0.5, 0.5};
  model.upper = {config.width - 1.0, config.frame_height - 1.0, config.frame_height - 1.0};
  model.linear_bounds.push_back({{0.0, 1.0, 1.0}, config.frame_height - 0.5, "magnet top inside the frame"});

  auto restricted = [&](const Eigen::Matrix2d& coeff, int label) {
    return restrict_to_free(assemble_subdomain_stiffness(mesh, label, coeff), dofs);
  };
  const Eigen::Matrix2d exx = (Eigen::Matrix2d() << 1, 0, 0, 0).finished();
  const Eigen::Matrix2d exy = (Eigen::Matrix2d() << 0, 1, 1, 0).finished();
  const Eigen::Matrix2d eyy = (Eigen::Matrix2d() << 0, 0, 0, 1).finished();

  auto& terms = model.stiffness.terms;
  auto& blocks = model.stiffness.blocks;
  for (int q = 0; q < kFramePieces; ++q) {
    const std::string base = "frame" + std::to_string(q + 1);
    CoefficientBlock block{2, {}};
    const char* names[3] = {".xx", ".xy", ".yy"};
    const Eigen::Matrix2d* coeffs[3] = {&exx, &exy, &eyy};
    for (int e = 0; e < 3; ++e) {
      auto theta = ThetaFunction::make(base + names[e] + " = [|det J| J^-1 J^-T]" + names[e], [geom, q, e](auto x) {
        using T = Elem<typename decltype(x)::element_type>;
        return geom.piece_tensor<T>(q, x.subspan(0, 3))[e];
      });
      block.terms.push_back(static_cast<int>(terms.size()));
      terms.push_back({std::move(theta), restricted(*coeffs[e], q + 1)});
    }
    blocks.push_back(block);
  }

  const double r1 = ref[0];
  const double r2 = ref[1];
  blocks.push_back({1, {static_cast<int>(terms.size())}});
  terms.push_back({ThetaFunction::make("magnet.xx = (p2/" + std::to_string(r2) + ")/(p1/" + std::to_string(r1) + ")",
                                       [r1, r2](auto x) { return (x[1] / r2) / (x[0] / r1); }),
                   restricted(exx, kMagnetLabel)});
  blocks.push_back({1, {static_cast<int>(terms.size())}});
  terms.push_back({ThetaFunction::make("magnet.yy = (p1/" + std::to_string(r1) + ")/(p2/" + std::to_string(r2) + ")",
                                       [r1, r2](auto x) { return (x[0] / r1) / (x[1] / r2); }),
                   restricted(eyy, kMagnetLabel)});
  blocks.push_back({1, {static_cast<int>(terms.size())}});
  terms.push_back({ThetaFunction::constant(1.0), restricted(Eigen::Matrix2d::Identity(), kLayerLabel)});

  // Magnet load ∫ m(φ)·∇v with m = M (cos φ°, sin φ°), pulled back to the
  // reference magnet: |det J| J⁻¹ m = M (p2/p̄2 cos φ°, p1/p̄1 sin φ°).
  const double mag = config.magnetization;
  model.load.terms.push_back(
      {ThetaFunction::make("M*(p2/" + std::to_string(r2) + ")*cos(phi deg)",
                           [mag, r2](auto x) {
                             using std::cos;
                             return mag * (x[1] / r2) * cos(x[3] * kDegree);
                           }),
       restrict_to_free(assemble_subdomain_gradient_load(mesh, kMagnetLabel, Eigen::Vector2d(1, 0)), dofs)});
  model.load.terms.push_back(
      {ThetaFunction::make("M*(p1/" + std::to_string(r1) + ")*sin(phi deg)",
                           [mag, r1](auto x) {
                             using std::sin;
                             return mag * (x[0] / r1) * sin(x[3] * kDegree);
                           }),
       restrict_to_free(assemble_subdomain_gradient_load(mesh, kMagnetLabel, Eigen::Vector2d(0, 1)), dofs)});

  SparseMatrix mass_full(mesh.num_nodes(), mesh.num_nodes());
  for (int q = 1; q <= mesh.num_subdomains; ++q) mass_full += assemble_subdomain_mass(mesh, q);
  model.mass = restrict_to_free(mass_full, dofs);
  std::vector<double> phi0{90.0};
  model.weight = model.stiffness.evaluate(model.variables(model.reference, phi0)) + model.mass;
  model.weight.makeCompressed();

  // Mean of u over the observation layer.
  SparseMatrix layer_mass = assemble_subdomain_mass(mesh, kLayerLabel);
  Vector ones = Vector::Ones(mesh.num_nodes());
  double layer_area = ones.dot(layer_mass * ones);
  model.output = restrict_to_free(Vector(layer_mass * ones), dofs) / layer_area;

  // Block tensors must stay positive definite over the admissible set.
  const int samples = 6;
  MultiIndex zero(model.num_vars(), 0);
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < samples; ++j) {
      for (int k = 0; k < samples; ++k) {
        std::vector<double> p{
            model.lower[0] + (model.upper[0] - model.lower[0]) * i / (samples - 1),
            model.lower[1] + (model.upper[1] - model.lower[1]) * j / (samples - 1),
            model.lower[2] + (model.upper[2] - model.lower[2]) * k / (samples - 1)};
        if (!model.is_admissible(p)) continue;
        auto x = model.variables(p, phi0);
        for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
          Eigen::MatrixXd c = model.stiffness.block_tensor(b, x, zero);
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
          if (!(es.eigenvalues()[0] > 0.0)) {
            throw InvalidInput("benchmark: coefficient block " + std::to_string(b) +
                               " loses positivity inside the admissible set");
          }
        }
      }
    }
  }

  return Benchmark{std::move(model), std::move(mesh), std::move(dofs), std::move(geom)};
}

}  // namespace certrom
