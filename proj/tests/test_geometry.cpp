#include <doctest.h>

#include <numbers>

#include "defpose/error.hpp"
#include "defpose/geometry.hpp"
#include "defpose/random.hpp"
#include "oracles.hpp"

using namespace defpose;

namespace {

constexpr double kPi = std::numbers::pi;

Rotation rz(double a) { return Rotation::about_axis(Vec3::UnitZ(), a); }

bool near(const Mat4& a, const Mat4& b, double tol) { return (a - b).cwiseAbs().maxCoeff() <= tol; }

}  // namespace

TEST_CASE("compose: identity, inverse and the hand-multiplied case") {
  oracle::Gen g(1);
  const Pose p{oracle::random_rotation(g), g.vec(-1, 1)};
  CHECK(near(compose(Pose::identity(), p).matrix(), p.matrix(), 0.0));
  CHECK(near(compose(p, p.inverse()).matrix(), Mat4::Identity(), 1e-12));

  const Pose a{rz(kPi / 2), Vec3(1, 0, 0)};
  const Pose b{rz(kPi / 2), Vec3::Zero()};
  Mat4 expected;
  expected << -1, 0, 0, 1,
              0, -1, 0, 0,
              0, 0, 1, 0,
              0, 0, 0, 1;
  CHECK(near(compose(a, b).matrix(), expected, 1e-15));
}

TEST_CASE("compose is associative and matches the 4x4 product") {
  oracle::Gen g(2);
  for (int i = 0; i < 50; ++i) {
    const Pose a{oracle::random_rotation(g), g.vec(-1, 1)};
    const Pose b{oracle::random_rotation(g), g.vec(-1, 1)};
    const Pose c{oracle::random_rotation(g), g.vec(-1, 1)};
    CHECK(near(compose(a, b).matrix(), a.matrix() * b.matrix(), 1e-12));
    CHECK(near(compose(compose(a, b), c).matrix(), compose(a, compose(b, c)).matrix(), 1e-12));
  }
}

TEST_CASE("geodesic distance") {
  CHECK(geodesic_distance(Rotation{}, Rotation{}) == 0.0);
  CHECK(geodesic_distance(Rotation{}, rz(kPi)) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(geodesic_distance(Rotation::about_axis(Vec3::UnitX(), 0.3), Rotation{}) == doctest::Approx(0.3).epsilon(1e-12));

  oracle::Gen g(3);
  for (int i = 0; i < 100; ++i) {
    const Rotation a = oracle::random_rotation(g), b = oracle::random_rotation(g);
    const double d = geodesic_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= kPi + 1e-12);
    CHECK(d == doctest::Approx(geodesic_distance(b, a)).epsilon(1e-9));
    // Left invariance.
    const Rotation c = oracle::random_rotation(g);
    CHECK(d == doctest::Approx(geodesic_distance(c * a, c * b)).epsilon(1e-7));
  }
}

TEST_CASE("exp and log agree with Rodrigues") {
  oracle::Gen g(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = g.direction() * g.uni(0.0, 3.0);
    CHECK((Rotation::exp(w).matrix() - oracle::rodrigues(w)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Rotation::exp(w).log() - w).norm() < 1e-9);
  }
  CHECK(Rotation::exp(Vec3::Zero()).matrix() == Mat3::Identity());
}

TEST_CASE("6-D rotation representation") {
  oracle::Gen g(5);
  const Rotation r = oracle::random_rotation(g);
  CHECK((orthonormalize_6d(to_6d(r)).matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-14);

  Vec6 v;
  v << 1, 0, 0, 1, 1, 0;
  CHECK((orthonormalize_6d(v).matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);

  v << 0, 0, 0, 1, 0, 0;
  CHECK_THROWS_AS(orthonormalize_6d(v), Error);
  try {
    orthonormalize_6d(v);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateInput);
  }
  v << 1, 0, 0, 2, 0, 0;  // parallel columns
  CHECK_THROWS_AS(orthonormalize_6d(v), Error);

  for (int i = 0; i < 100; ++i) {
    Vec6 x;
    for (int k = 0; k < 6; ++k) x[k] = g.gauss();
    CHECK(orthonormalize_6d(x).is_valid(1e-12));
  }
}

TEST_CASE("pose from matrix validation") {
  Mat4 m = Mat4::Identity();
  m(0, 0) = 2.0;
  CHECK_THROWS_AS(Pose::from_matrix(m), Error);
  m = Mat4::Identity();
  m(3, 0) = 1.0;
  CHECK_THROWS_AS(Pose::from_matrix(m), Error);
  m = Mat4::Identity();
  m(2, 2) = -1.0;  // reflection
  CHECK_THROWS_AS(Pose::from_matrix(m), Error);
}

TEST_CASE("pinhole projection") {
  const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  CHECK((project(Vec3(0, 0, 1), k) - Vec2(320, 240)).norm() == 0.0);
  CHECK((project(Vec3(0.1, 0, 1), k) - Vec2(370, 240)).norm() < 1e-12);
  try {
    project(Vec3(0, 0, -1), k);
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BehindCamera);
  }
  oracle::Gen g(6);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = Vec3(g.uni(-0.3, 0.3), g.uni(-0.3, 0.3), g.uni(0.2, 2.0));
    CHECK((backproject(project(p, k), p.z(), k) - p).norm() < 1e-12);
  }
}

TEST_CASE("crop translation code") {
  const CameraIntrinsics k{600, 610, 320, 240, 640, 480};
  const CropGeometry crop{300, 200, 128, 96, 640, 480};
  oracle::Gen g(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 t(g.uni(-0.2, 0.2), g.uni(-0.2, 0.2), g.uni(0.3, 1.5));
    CHECK((decode_crop_translation(encode_crop_translation(t, crop, k), crop, k) - t).norm() < 1e-12);
  }
  // u = v = 0 places the object on the viewing ray through the crop center.
  const Vec3 t = decode_crop_translation(Vec3(0, 0, 0.2), crop, k);
  const Vec3 ray((300 - 320) / 600.0, (200 - 240) / 610.0, 1.0);
  CHECK(t.cross(ray).norm() < 1e-12);
  CHECK(t.z() == doctest::Approx(0.2 * 640 / 128).epsilon(1e-12));
  try {
    decode_crop_translation(Vec3(0, 0, 0), crop, k);
    FAIL("expected InvalidDepth");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidDepth);
  }
}

TEST_CASE("rng sub-streams are stable and distinct") {
  CHECK(derive_seed(7, "scene") == derive_seed(7, "scene"));
  CHECK(derive_seed(7, "scene") != derive_seed(7, "noise"));
  CHECK(derive_seed(7, "scene") != derive_seed(8, "scene"));
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
  Rng r(1);
  double mean = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.02));
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("error messages name the operation") {
  try {
    orthonormalize_6d(Vec6::Zero());
  } catch (const Error& e) {
    CHECK(e.where().find('.') != std::string::npos);
    CHECK(!e.message().empty());
  }
}
