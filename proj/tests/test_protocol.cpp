#include <doctest.h>

#include <numbers>

#include "defpose/error.hpp"
#include "defpose/protocol.hpp"
#include "oracles.hpp"

using namespace defpose;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Distance from `center` to the camera's optical axis.
double axis_residual(const Pose& cam, const Vec3& center) {
  const Vec3 z = cam.rotation.matrix().col(2);
  const Vec3 d = center - cam.translation;
  return (d - d.dot(z) * z).norm();
}

}  // namespace

TEST_CASE("look-at convention") {
  const Pose p = lookat_pose(Vec3(0, 0, -1), Vec3::Zero(), Vec3(0, 1, 0));
  CHECK((p.rotation.matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.translation == Vec3(0, 0, -1));

  oracle::Gen g(71);
  for (int i = 0; i < 200; ++i) {
    const Vec3 pos = g.vec(-2, 2), tgt = g.vec(-2, 2);
    const Vec3 up = g.direction();
    if ((tgt - pos).normalized().cross(up).norm() < 1e-3) continue;
    const Pose c = lookat_pose(pos, tgt, up);
    CHECK(c.rotation.is_valid(1e-12));
    // Viewing direction maps to +z in the camera frame.
    const Vec3 v = c.rotation.inverse() * (tgt - pos).normalized();
    CHECK((v - Vec3(0, 0, 1)).norm() < 1e-12);
    // +y stays in the plane of the view ray and the hint, on the hint's side.
    CHECK(c.rotation.matrix().col(1).dot(up) > 0.0);
    CHECK(std::abs(c.rotation.matrix().col(0).dot(up)) < 1e-12);
  }
  for (const auto& bad : {std::pair{Vec3(0, 0, 1), Vec3(0, 0, 1)}, std::pair{Vec3(0, 0, 0), Vec3(0, 0, 1)}}) {
    try {
      lookat_pose(bad.first, Vec3::Zero(), bad.second);
      FAIL("expected DegenerateLookAt");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateLookAt);
    }
  }
}

TEST_CASE("default protocol") {
  const ProtocolSpec spec;
  const auto cams = generate_protocol(spec);
  CHECK(spec.placement_count() == 3 * (3 * 11 + 3));
  CHECK(cams.size() == 108);
  for (const auto& c : cams) {
    CHECK(axis_residual(c.extrinsic, spec.scene_center) < 1e-9);
    CHECK(std::abs((c.extrinsic.translation - spec.scene_center).norm() - c.radius) < 1e-9);
    // In front of the camera, and image-down points toward world-down.
    CHECK((c.extrinsic.inverse().apply(spec.scene_center)).z() > 0.0);
    CHECK(c.extrinsic.rotation.matrix().col(1).z() < 0.0);
    // Elevation above the horizontal plane through the center.
    const Vec3 d = c.extrinsic.translation - spec.scene_center;
    CHECK(std::asin(d.z() / d.norm()) == doctest::Approx(c.elevation * kDeg).epsilon(1e-12));
  }
  // Ordering: radius, elevation (top-down last), azimuth.
  CHECK(cams[0].radius_index == 0);
  CHECK(cams[0].azimuth == doctest::Approx(-40.0));
  CHECK(cams[10].azimuth == doctest::Approx(40.0));
  CHECK(cams[11].elevation_index == 1);
  CHECK(cams[33].topdown);
  CHECK(cams[33].elevation == 80.0);
  CHECK(cams[35].azimuth == doctest::Approx(10.0));
  CHECK(cams[36].radius_index == 1);
  CHECK(cams[107].radius == 0.7);
  // The arc faces the base: the mid-arc camera sits between base and center.
  CHECK(cams[5].extrinsic.translation.x() < spec.scene_center.x());
  CHECK(std::abs(cams[5].extrinsic.translation.y()) < 1e-12);
}

TEST_CASE("single placement") {
  ProtocolSpec s;
  s.radii = {0.5};
  s.lateral_elevations = {30.0};
  s.azimuth_count = 1;
  s.topdown_count = 0;
  const auto cams = generate_protocol(s);
  REQUIRE(cams.size() == 1);
  const Vec3 expected = s.scene_center + 0.5 * Vec3(-std::cos(30 * kDeg), 0, std::sin(30 * kDeg));
  CHECK((cams[0].extrinsic.translation - expected).norm() < 1e-12);
  CHECK(cams[0].azimuth == 0.0);
}

TEST_CASE("invalid specs") {
  const auto kind = [](ProtocolSpec s) {
    try {
      s.validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  ProtocolSpec s;
  s.radii = {};
  CHECK(kind(s) == ErrorKind::InvalidSpec);
  s = ProtocolSpec{};
  s.radii = {-0.5};
  CHECK(kind(s) == ErrorKind::InvalidSpec);
  s = ProtocolSpec{};
  s.azimuth_count = 0;
  CHECK(kind(s) == ErrorKind::InvalidSpec);
  s = ProtocolSpec{};
  s.lateral_elevations = {95.0};
  CHECK(kind(s) == ErrorKind::InvalidSpec);
  s = ProtocolSpec{};
  s.topdown_elevation = 90.0;  // straight down makes the up hint parallel
  CHECK(kind(s) == ErrorKind::InvalidSpec);
}
