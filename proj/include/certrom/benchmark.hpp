// SPDX-License-Identifier: Apache-2.0
//
// Magnet-block benchmark: a rectangular frame containing a rectangular
// magnet of width p₁, height p₂ and bottom offset p₃, with an undeformed
// observation layer on top. The frame is split into twelve triangles so
// that every admissible design is reached by a piecewise-affine map of a
// single reference mesh.

#pragma once

#include <array>

#include "certrom/affine.hpp"

namespace certrom {

struct BenchmarkConfig {
  double width = 40.0;          // frame width
  double frame_height = 20.0;   // frame height (bottom of the observation layer)
  double layer_height = 4.0;    // observation layer above the frame
  std::array<double, 3> reference{19.0, 7.0, 7.0};  // p̄ = (width, height, offset)
  int subdivisions = 24;        // edge subdivisions per affine piece
  double magnetization = 120.0;  // magnitude of the magnet load
};

/// Subdomain labels: 1..12 frame triangles, 13 magnet, 14 observation layer.
inline constexpr int kMagnetLabel = 13;
inline constexpr int kLayerLabel = 14;
inline constexpr int kFramePieces = 12;

class BenchmarkGeometry {
 public:
  explicit BenchmarkGeometry(const BenchmarkConfig& config);

  /// Vertices of the twelve frame triangles for design p (counter-clockwise).
  [[nodiscard]] std::array<std::array<Point, 3>, kFramePieces> frame_triangles(std::span<const double> p) const;
  /// Magnet rectangle (x0, y0, x1, y1) for design p.
  [[nodiscard]] std::array<double, 4> magnet_box(std::span<const double> p) const;
  [[nodiscard]] const BenchmarkConfig& config() const { return config_; }
  /// Image of a reference point of subdomain `label` under the map T(p).
  [[nodiscard]] Point map_point(int label, const Point& x, std::span<const double> p) const;

  /// Frame piece coefficient tensor |det J| J⁻¹J⁻ᵀ as (xx, xy, yy).
  template <class T>
  std::array<T, 3> piece_tensor(int piece, std::span<const T> p) const;

 private:
  template <class T>
  std::array<std::array<T, 2>, 12> control_points(std::span<const T> p) const;

  BenchmarkConfig config_;
};

struct Benchmark {
  AffineModel model;
  Mesh mesh;  // reference mesh
  DofMap dofs;
  BenchmarkGeometry geometry;
};

/// Builds reference mesh and affine model; throws InvalidInput if p̄ does not fit the frame.
Benchmark build_benchmark(const BenchmarkConfig& config);

/// Reference mesh with every node moved by T(p); used to cross-check the
/// affine decomposition against plain assembly on the physical domain.
Mesh mapped_mesh(const Benchmark& bench, std::span<const double> p);

/// Reference mesh only.
Mesh build_reference_mesh(const BenchmarkConfig& config);

}  // namespace certrom
