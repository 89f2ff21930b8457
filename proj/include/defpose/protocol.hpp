#pragma once

#include <cstddef>
#include <vector>

#include "defpose/geometry.hpp"

namespace defpose {

/// Spherical capture layout around a scene center. World +z is up and the
/// robot base sits at the world origin. Angles are in degrees.
struct ProtocolSpec {
  Vec3 scene_center{0.8, 0.0, 0.0};
  std::vector<double> radii{0.5, 0.6, 0.7};
  std::vector<double> lateral_elevations{15.0, 30.0, 45.0};
  int azimuth_count = 11;
  double arc_span = 80.0;
  double topdown_elevation = 80.0;
  int topdown_count = 3;
  double topdown_span = 20.0;

  /// Throws InvalidSpec.
  void validate() const;
  std::size_t placement_count() const;
};

struct CameraPlacement {
  Pose extrinsic;  ///< camera in world
  std::size_t radius_index = 0;
  /// Index into lateral_elevations; equal to its size for top-down views.
  std::size_t elevation_index = 0;
  std::size_t azimuth_index = 0;
  bool topdown = false;
  double radius = 0.0;
  double elevation = 0.0;  ///< degrees
  double azimuth = 0.0;    ///< degrees, relative to the arc center
};

/// Camera at `position` looking at `target`: +z toward the target, +y as
/// close to `up_hint` as possible, +x = y × z. Throws DegenerateLookAt when
/// position and target coincide or up_hint is parallel to the view ray.
Pose lookat_pose(const Vec3& position, const Vec3& target, const Vec3& up_hint);

/// Every radius gets one arc per lateral elevation with `azimuth_count`
/// views, then `topdown_count` views at the top-down elevation. Arcs are
/// centered on the direction from the scene center back toward the base
/// (−x when the center is above the base). Cameras keep image-down pointing
/// toward world-down. Ordering: radius, then elevation (top-down last),
/// then azimuth.
std::vector<CameraPlacement> generate_protocol(const ProtocolSpec& spec);

}  // namespace defpose
