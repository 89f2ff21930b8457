#include "defpose/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "defpose/error.hpp"

namespace defpose {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

void check(bool ok, const char* message) {
  if (!ok) throw Error(ErrorKind::InvalidSpec, "protocol.generate", message);
}

bool valid_elevation(double e) { return std::isfinite(e) && e > -90.0 && e < 90.0; }
bool valid_span(double s) { return std::isfinite(s) && s > 0.0 && s <= 360.0; }

/// Azimuth of view k out of `count`, spread evenly over `span` and centered
/// on zero.
double azimuth_at(int k, int count, double span) {
  if (count == 1) return 0.0;
  return -0.5 * span + span * static_cast<double>(k) / static_cast<double>(count - 1);
}

}  // namespace

void ProtocolSpec::validate() const {
  check(scene_center.allFinite(), "scene center must be finite");
  check(!radii.empty(), "at least one radius is required");
  for (double r : radii) check(std::isfinite(r) && r > 0.0, "radii must be positive");
  for (double e : lateral_elevations) check(valid_elevation(e), "elevations must lie strictly between -90 and 90 degrees");
  check(azimuth_count >= 1, "azimuth_count must be at least 1");
  check(valid_span(arc_span), "arc_span must lie in (0, 360]");
  check(topdown_count >= 0, "topdown_count must not be negative");
  if (topdown_count > 0) {
    check(valid_elevation(topdown_elevation), "topdown_elevation must lie strictly between -90 and 90 degrees");
    check(valid_span(topdown_span), "topdown_span must lie in (0, 360]");
  }
  check(!lateral_elevations.empty() || topdown_count > 0, "spec yields no placements");
}

std::size_t ProtocolSpec::placement_count() const {
  return radii.size() * (lateral_elevations.size() * static_cast<std::size_t>(azimuth_count) +
                         static_cast<std::size_t>(topdown_count));
}

Pose lookat_pose(const Vec3& position, const Vec3& target, const Vec3& up_hint) {
  const Vec3 view = target - position;
  const double dist = view.norm();
  if (!(dist > 1e-12)) throw Error(ErrorKind::DegenerateLookAt, "protocol.lookat", "position coincides with target");
  const Vec3 z = view / dist;
  const Vec3 y_raw = up_hint - up_hint.dot(z) * z;
  const double y_norm = y_raw.norm();
  if (!(y_norm > 1e-9 * std::max(1.0, up_hint.norm())))
    throw Error(ErrorKind::DegenerateLookAt, "protocol.lookat", "up hint is parallel to the viewing direction");
  const Vec3 y = y_raw / y_norm;
  const Vec3 x = y.cross(z);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Pose{Rotation::from_matrix(m, 1e-9), position};
}

std::vector<CameraPlacement> generate_protocol(const ProtocolSpec& spec) {
  spec.validate();
  const Vec3 up(0.0, 0.0, 1.0);
  Vec3 toward_base(-spec.scene_center.x(), -spec.scene_center.y(), 0.0);
  toward_base = toward_base.norm() > 1e-12 ? toward_base.normalized() : Vec3(-1.0, 0.0, 0.0);
  const Vec3 side = up.cross(toward_base);
  const Vec3 world_down(0.0, 0.0, -1.0);

  std::vector<CameraPlacement> out;
  out.reserve(spec.placement_count());
  const auto place = [&](std::size_t ri, std::size_t ei, int ai, bool topdown, double elevation, double azimuth) {
    const double r = spec.radii[ri];
    const double e = elevation * kDegree;
    const double a = azimuth * kDegree;
    const Vec3 horizontal = std::cos(a) * toward_base + std::sin(a) * side;
    const Vec3 dir = std::cos(e) * horizontal + std::sin(e) * up;
    CameraPlacement p;
    p.extrinsic = lookat_pose(spec.scene_center + r * dir, spec.scene_center, world_down);
    p.radius_index = ri;
    p.elevation_index = ei;
    p.azimuth_index = static_cast<std::size_t>(ai);
    p.topdown = topdown;
    p.radius = r;
    p.elevation = elevation;
    p.azimuth = azimuth;
    out.push_back(p);
  };

  for (std::size_t ri = 0; ri < spec.radii.size(); ++ri) {
    for (std::size_t ei = 0; ei < spec.lateral_elevations.size(); ++ei) {
      for (int ai = 0; ai < spec.azimuth_count; ++ai)
        place(ri, ei, ai, false, spec.lateral_elevations[ei], azimuth_at(ai, spec.azimuth_count, spec.arc_span));
    }
    for (int ai = 0; ai < spec.topdown_count; ++ai)
      place(ri, spec.lateral_elevations.size(), ai, true, spec.topdown_elevation,
            azimuth_at(ai, spec.topdown_count, spec.topdown_span));
  }
  return out;
}

}  // namespace defpose
