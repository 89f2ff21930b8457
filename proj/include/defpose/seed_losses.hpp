#pragma once

#include <array>

#include "defpose/geometry.hpp"
#include "defpose/lattice.hpp"
#include "defpose/mesh.hpp"

namespace defpose::losses {

using Offsets = std::array<double, 24>;

/// Raw network outputs.
struct SeedPrediction {
  Vec6 rotation6d = Vec6::Zero();
  Vec3 translation_code = Vec3::Zero();  ///< crop-relative (u, v, depth code)
  Offsets lattice_offsets{};              ///< meters

  bool is_finite() const;
};

struct SeedTarget {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();  ///< meters, camera frame
  Offsets lattice_offsets{};
  TriMesh mesh;  ///< undeformed base mesh
  Aabb box;      ///< lattice box of `mesh`
  CameraIntrinsics intrinsics;
  CropGeometry crop;
  LatticeBlend blend = LatticeBlend::Quintic;
};

struct SeedLossWeights {
  double rot = 1.0;
  double t = 1.0;
  double def = 1.0;
  double reg = 1.0;
  double v3d = 1.0;
  double p2d = 1.0;

  /// Throws InvalidArgument for a negative or non-finite weight.
  void validate() const;
};

/// Geodesic angle between the orthonormalized prediction and `gt`.
double rotation_loss(const Vec6& pred, const Rotation& gt);

/// ‖pred − gt‖² in m².
double translation_loss(const Vec3& pred, const Vec3& gt);
Vec3 translation_loss_gradient(const Vec3& pred, const Vec3& gt);

/// (1/24)·Σ (pred_k − gt_k)².
double deformation_loss(const Offsets& pred, const Offsets& gt);
Offsets deformation_loss_gradient(const Offsets& pred, const Offsets& gt);

/// (1/24)·Σ pred_k².
double deformation_reg(const Offsets& pred);
Offsets deformation_reg_gradient(const Offsets& pred);

/// Mean squared distance between the base mesh deformed and posed by the
/// prediction and by the target. The predicted translation is decoded from
/// its crop code.
double vertex3d_loss(const SeedPrediction& pred, const SeedTarget& tgt);

/// Mean squared distance between the projected vertices of both posed
/// meshes, with pixel coordinates divided by image width and height.
/// Throws BehindCamera.
double projection2d_loss(const SeedPrediction& pred, const SeedTarget& tgt);

struct SeedLossBreakdown {
  double rot = 0.0;
  double t = 0.0;
  double def = 0.0;
  double reg = 0.0;
  double v3d = 0.0;
  double p2d = 0.0;
  double total = 0.0;  ///< weighted sum of the terms above
};

/// Unweighted terms in `rot`..`p2d`, weighted sum in `total`. Terms whose
/// weight is zero are still evaluated.
SeedLossBreakdown total_loss(const SeedPrediction& pred, const SeedTarget& tgt, const SeedLossWeights& w);

/// Prediction that reproduces `tgt` exactly in every head.
SeedPrediction perfect_prediction(const SeedTarget& tgt);

}  // namespace defpose::losses
