#include "defpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "defpose/error.hpp"

namespace defpose {

Rotation Rotation::from_matrix(const Mat3& m, double tolerance) {
  Rotation r(m);
  if (!r.is_valid(tolerance)) {
    std::ostringstream os;
    os << "matrix is not a proper rotation (|RᵀR − I| = "
       << (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() << ", det = " << m.determinant() << ")";
    throw Error(ErrorKind::InvalidRotation, "geometry.rotation", os.str());
  }
  return r;
}

Rotation Rotation::about_axis(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::DegenerateInput, "geometry.about_axis", "zero rotation axis");
  return Rotation(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix());
}

Rotation Rotation::exp(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-15) {
    // First-order expansion I + [ω]x, exact to machine precision here.
    Mat3 m = Mat3::Identity();
    m(0, 1) = -omega.z(); m(0, 2) = omega.y();
    m(1, 0) = omega.z();  m(1, 2) = -omega.x();
    m(2, 0) = -omega.y(); m(2, 1) = omega.x();
    return Rotation(m);
  }
  return Rotation(Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix());
}

Vec3 Rotation::log() const {
  const Vec3 skew(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
  const double s = 0.5 * skew.norm();
  const double c = 0.5 * (m_.trace() - 1.0);
  const double angle = std::atan2(s, c);
  if (angle < 1e-8) return 0.5 * skew;
  if (std::numbers::pi - angle > 1e-6) return angle / (2.0 * std::sin(angle)) * skew;
  // Near π the skew part vanishes; recover the axis from the symmetric part.
  const Mat3 b = 0.5 * (m_ + Mat3::Identity());
  int col = 0;
  b.diagonal().maxCoeff(&col);
  Vec3 axis = b.col(col) / std::sqrt(std::max(b(col, col), 1e-300));
  axis.normalize();
  if (axis.dot(skew) < 0.0) axis = -axis;
  return angle * axis;
}

double Rotation::angle() const { return geodesic_distance(Rotation{}, *this); }

bool Rotation::is_valid(double tolerance) const {
  if (!m_.allFinite()) return false;
  const double ortho = (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(m_.determinant() - 1.0) <= tolerance;
}

Pose Pose::from_matrix(const Mat4& m, double tolerance) {
  if (std::abs(m(3, 0)) > tolerance || std::abs(m(3, 1)) > tolerance || std::abs(m(3, 2)) > tolerance ||
      std::abs(m(3, 3) - 1.0) > tolerance) {
    throw Error(ErrorKind::InvalidArgument, "geometry.pose", "bottom row of a rigid transform must be (0, 0, 0, 1)");
  }
  Pose p;
  p.rotation = Rotation::from_matrix(m.topLeftCorner<3, 3>(), tolerance);
  p.translation = m.topRightCorner<3, 1>();
  if (!p.translation.allFinite()) throw Error(ErrorKind::InvalidArgument, "geometry.pose", "non-finite translation");
  return p;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.inverse();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool Pose::is_finite() const { return rotation.matrix().allFinite() && translation.allFinite(); }

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
  // atan2 of the skew and symmetric parts: same angle as the arccos of the
  // trace, but well conditioned near 0 and π.
  const Mat3 m = a.matrix().transpose() * b.matrix();
  const Vec3 skew(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * skew.norm(), 0.5 * (m.trace() - 1.0));
}

double translation_distance(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

Rotation orthonormalize_6d(const Vec6& v) {
  constexpr double kMinNorm = 1e-12;
  const Vec3 a1 = v.head<3>();
  const Vec3 a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (!(n1 >= kMinNorm)) throw Error(ErrorKind::DegenerateInput, "geometry.orthonormalize_6d", "first vector is zero");
  const Vec3 b1 = a1 / n1;
  const Vec3 r2 = a2 - b1.dot(a2) * b1;
  const double n2 = r2.norm();
  if (!(n2 >= kMinNorm)) {
    throw Error(ErrorKind::DegenerateInput, "geometry.orthonormalize_6d", "second vector is parallel to the first");
  }
  const Vec3 b2 = r2 / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return Rotation(m);
}

Vec6 to_6d(const Rotation& r) {
  Vec6 v;
  v.head<3>() = r.matrix().col(0);
  v.tail<3>() = r.matrix().col(1);
  return v;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::InvalidArgument, "geometry.intrinsics", "focal lengths must be positive");
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "geometry.intrinsics", "image size must be at least 1x1");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw Error(ErrorKind::InvalidArgument, "geometry.intrinsics", "non-finite principal point");
}

void CropGeometry::validate() const {
  if (!(crop_w > 0.0) || !(crop_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "geometry.crop", "crop size must be positive");
  if (!(image_w > 0.0) || !(image_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "geometry.crop", "image size must be positive");
  if (center_x < 0.0 || center_x > image_w || center_y < 0.0 || center_y > image_h) {
    throw Error(ErrorKind::InvalidArgument, "geometry.crop", "crop center outside the image");
  }
}

std::array<double, 4> CropGeometry::placement_vector() const {
  return {center_x / image_w, center_y / image_h, crop_w / image_w, crop_h / image_h};
}

Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 1e-9)) throw Error(ErrorKind::BehindCamera, "geometry.project", "point has non-positive depth");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
  return {(pixel.x() - k.cx) * depth / k.fx, (pixel.y() - k.cy) * depth / k.fy, depth};
}

Vec3 encode_crop_translation(const Vec3& t, const CropGeometry& crop, const CameraIntrinsics& k) {
  const Vec2 px = project(t, k);
  return {(px.x() - crop.center_x) / crop.crop_w, (px.y() - crop.center_y) / crop.crop_h,
          t.z() * crop.crop_w / crop.image_w};
}

Vec3 decode_crop_translation(const Vec3& code, const CropGeometry& crop, const CameraIntrinsics& k) {
  if (!(code.z() > 0.0)) throw Error(ErrorKind::InvalidDepth, "geometry.decode_crop_translation", "depth code must be positive");
  const double z = code.z() * crop.image_w / crop.crop_w;
  const Vec2 px(code.x() * crop.crop_w + crop.center_x, code.y() * crop.crop_h + crop.center_y);
  return backproject(px, z, k);
}

}  // namespace defpose
