#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "defpose/geometry.hpp"

namespace defpose {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh in the canonical object frame (meters).
///
/// Construction validates that every index is in range, no triangle repeats
/// a vertex, and every coordinate is finite. The mesh is immutable afterwards.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  bool empty() const { return vertices_.empty(); }

  /// Same topology, new vertex positions. Throws InvalidMesh on a count mismatch.
  TriMesh with_vertices(std::vector<Vec3> vertices) const;
  /// Applies `pose` to every vertex.
  TriMesh transformed(const Pose& pose) const;

  double surface_area() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p, double slack = 0.0) const;
};

/// Componentwise min/max. Throws EmptyMesh for a mesh without vertices.
Aabb bounding_box(const TriMesh& mesh);
Aabb bounding_box(std::span<const Vec3> points);

/// Reads ASCII OBJ (`v` and triangular `f` records) or ASCII PLY 1.0, chosen
/// by file extension. Binary PLY is rejected. Parse failures carry the line
/// number in the message.
TriMesh load_mesh(const std::filesystem::path& path);
/// Writes ASCII OBJ or PLY by extension with 17 significant digits, so PLY
/// and OBJ both reload bit-exactly.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

TriMesh parse_obj(std::string_view text);
TriMesh parse_ply(std::string_view text);
std::string format_obj(const TriMesh& mesh);
std::string format_ply(const TriMesh& mesh);

/// Area-uniform surface samples.
///
/// A triangle is picked by inverting the cumulative area table with one
/// uniform draw, then a point inside it by the square-root barycentric map
/// (r1, r2) ↦ (1 − √r1, √r1·(1 − r2), √r1·r2). Randomness comes from
/// `Rng(seed)`, so the output is reproducible across platforms. Throws
/// DegenerateMesh when the total area is below 1e-15.
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

/// Triangle index of each sample in the same draw order as sample_surface.
/// Exposed for distribution tests.
std::vector<std::size_t> sample_surface_triangles(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

namespace primitives {

/// Axis-aligned cube centered at the origin (8 vertices, 12 triangles).
TriMesh cube(double edge = 1.0);
/// UV sphere centered at the origin.
TriMesh uv_sphere(double radius, int rings, int segments);
/// Closed pear-like surface of revolution along +z, bulging at the bottom
/// and with a slight lateral bend so it has no rotational symmetry.
/// Roughly `length` tall.
TriMesh produce(double length = 0.09, int rings = 24, int segments = 32);
/// `produce` with three lengthwise ridges and a one-sided bulge. Its
/// silhouettes pin down rotation about the long axis much better.
TriMesh ridged_produce(double length = 0.09, int rings = 16, int segments = 24);

}  // namespace primitives

}  // namespace defpose
