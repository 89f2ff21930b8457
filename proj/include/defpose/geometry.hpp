#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace defpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Proper rotation matrix. Instances built through `from_matrix` are checked
/// for orthonormality (mᵀm = I) and det = +1 within 1e-9; the other factories
/// produce valid rotations by construction.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return {}; }
  /// Throws InvalidRotation when `m` is not orthonormal with det +1.
  static Rotation from_matrix(const Mat3& m, double tolerance = 1e-9);
  static Rotation about_axis(const Vec3& axis, double angle);
  /// Exponential map of an axis-angle vector (direction = axis, norm = angle).
  static Rotation exp(const Vec3& omega);

  const Mat3& matrix() const { return m_; }
  /// Axis-angle vector with angle in [0, π].
  Vec3 log() const;
  double angle() const;
  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  bool is_valid(double tolerance = 1e-9) const;

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  friend Rotation orthonormalize_6d(const Vec6& v);
  Mat3 m_;
};

/// Rigid transform x ↦ R·x + t. Translation in meters.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  /// Throws InvalidRotation when the upper-left block is not a rotation, and
  /// InvalidArgument when the bottom row is not (0, 0, 0, 1).
  static Pose from_matrix(const Mat4& m, double tolerance = 1e-9);

  Mat4 matrix() const;
  Pose inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  bool is_finite() const;
};

/// Applies `b` then `a`: compose(a, b)(x) = a(b(x)).
Pose compose(const Pose& a, const Pose& b);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// Angle of aᵀb, arccos((trace(aᵀb) − 1) / 2), evaluated as an atan2 of
/// the skew and symmetric parts so identical rotations give exactly 0.
double geodesic_distance(const Rotation& a, const Rotation& b);

/// Euclidean distance between translations.
double translation_distance(const Pose& a, const Pose& b);

/// Continuous 6D rotation representation: v = (a1, a2), the first two columns
/// of the rotation before orthonormalization. Gram-Schmidt on (a1, a2); the
/// third column is their cross product. Throws DegenerateInput when either
/// normalization would divide by a norm below 1e-12.
Rotation orthonormalize_6d(const Vec6& v);

/// First two columns of `r`, the inverse of orthonormalize_6d on valid input.
Vec6 to_6d(const Rotation& r);

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvalidArgument when fx, fy ≤ 0 or the image is empty.
  void validate() const;
};

/// Detection crop placement inside the full image, in pixels.
struct CropGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double crop_w = 1.0;
  double crop_h = 1.0;
  double image_w = 1.0;
  double image_h = 1.0;

  void validate() const;
  /// (c_x/W, c_y/H, w/W, h/H), the placement vector fed to the network.
  std::array<double, 4> placement_vector() const;
};

/// Pinhole projection (fx·x/z + cx, fy·y/z + cy). Throws BehindCamera when
/// z ≤ 1e-9.
Vec2 project(const Vec3& p, const CameraIntrinsics& k);

/// Point at depth z on the viewing ray through pixel (u, v).
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k);

/// Crop-relative translation code (u, v, depth_code):
///   (px, py) = project(t)
///   u = (px − center_x) / crop_w,  v = (py − center_y) / crop_h
///   depth_code = z · crop_w / image_w
Vec3 encode_crop_translation(const Vec3& t, const CropGeometry& crop, const CameraIntrinsics& k);

/// Inverse of encode_crop_translation. Throws InvalidDepth when the depth
/// code is not positive.
Vec3 decode_crop_translation(const Vec3& code, const CropGeometry& crop, const CameraIntrinsics& k);

}  // namespace defpose
