#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "defpose/mesh.hpp"

namespace defpose {

/// Per-axis blending used by the 2×2×2 lattice.
enum class LatticeBlend {
  /// h(t) = 6t⁵ − 15t⁴ + 10t³. C² with vanishing first and second
  /// derivatives at the lattice faces; interpolating at the corners.
  Quintic,
  /// h(t) = t.
  Trilinear,
};

std::string_view to_string(LatticeBlend blend);
/// Accepts "quintic" or "trilinear"; throws InvalidArgument otherwise.
LatticeBlend parse_lattice_blend(std::string_view name);

/// Offsets of the 8 lattice corners (meters). Corner c = 4·ix + 2·iy + iz
/// for corner bits (ix, iy, iz) ∈ {0,1}³, so the flat 24-vector stores
/// corner c at entries [3c, 3c + 3) as (x, y, z).
struct LatticeDeformation {
  std::array<double, 24> offsets{};

  static constexpr int kCorners = 8;
  static constexpr int corner_index(int ix, int iy, int iz) { return 4 * ix + 2 * iy + iz; }

  Vec3 corner(int c) const { return {offsets[3 * c], offsets[3 * c + 1], offsets[3 * c + 2]}; }
  void set_corner(int c, const Vec3& d);
  bool is_finite() const;
};

/// Corner displacement bound, as a fraction of the box diagonal.
struct DeformationBounds {
  double max_offset_fraction = 0.0;

  void validate() const;
};

/// Per-axis blend value h(t).
double blend_value(double t, LatticeBlend blend);

/// Tensor-product weights of the 8 corners at normalized coordinates
/// t ∈ [0,1]³, ordered like LatticeDeformation. Sum to 1 for every t.
std::array<double, 8> lattice_weights(const Vec3& t, LatticeBlend blend);

/// Normalized lattice coordinates (p − min) / (max − min). Axes with zero
/// extent map to 0. Points within 1e-9 of the box are clamped onto it;
/// anything farther out throws VertexOutsideLattice.
Vec3 lattice_coordinates(const Vec3& p, const Aabb& box);

/// Displacement Σ_c w(t, c)·offset_c at point `p`.
Vec3 lattice_displacement(const Vec3& p, const Aabb& box, const LatticeDeformation& d,
                          LatticeBlend blend = LatticeBlend::Quintic);

/// Warps every vertex by the lattice displacement. Topology is unchanged.
TriMesh deform(const TriMesh& mesh, const Aabb& box, const LatticeDeformation& d,
               LatticeBlend blend = LatticeBlend::Quintic);

/// Rigid transform (no scale) minimizing Σ‖T·sᵢ − tᵢ‖², via SVD of the
/// cross-covariance with reflection correction. Throws
/// DegenerateConfiguration when fewer than 3 pairs are given, the counts
/// differ, or either centered point set has rank < 2.
Pose umeyama_align(std::span<const Vec3> source, std::span<const Vec3> target);

/// Re-expresses `deformed` so that its optimal rigid alignment to `base` is
/// the identity: returns umeyama_align(deformed, base) applied to `deformed`.
TriMesh canonicalize(const TriMesh& base, const TriMesh& deformed);

/// Every component uniform in [−h, h] with h = fraction · box diagonal,
/// drawn from Rng(seed) in flat 24-vector order.
LatticeDeformation sample_deformation(const DeformationBounds& bounds, const Aabb& box, std::uint64_t seed);

}  // namespace defpose
