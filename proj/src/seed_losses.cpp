#include "defpose/seed_losses.hpp"

#include <cmath>
#include <vector>

#include "defpose/error.hpp"

namespace defpose::losses {

namespace {

constexpr double kComponents = 24.0;

LatticeDeformation as_deformation(const Offsets& o) {
  LatticeDeformation d;
  d.offsets = o;
  return d;
}

struct PosedPair {
  std::vector<Vec3> pred;
  std::vector<Vec3> gt;
};

PosedPair posed_vertices(const SeedPrediction& pred, const SeedTarget& tgt) {
  const Pose pred_pose{orthonormalize_6d(pred.rotation6d),
                       decode_crop_translation(pred.translation_code, tgt.crop, tgt.intrinsics)};
  const Pose gt_pose{tgt.rotation, tgt.translation};
  const TriMesh pred_mesh = deform(tgt.mesh, tgt.box, as_deformation(pred.lattice_offsets), tgt.blend);
  const TriMesh gt_mesh = deform(tgt.mesh, tgt.box, as_deformation(tgt.lattice_offsets), tgt.blend);
  PosedPair out;
  out.pred.reserve(pred_mesh.vertices().size());
  out.gt.reserve(gt_mesh.vertices().size());
  for (const auto& v : pred_mesh.vertices()) out.pred.push_back(pred_pose.apply(v));
  for (const auto& v : gt_mesh.vertices()) out.gt.push_back(gt_pose.apply(v));
  return out;
}

}  // namespace

bool SeedPrediction::is_finite() const {
  if (!rotation6d.allFinite() || !translation_code.allFinite()) return false;
  for (double v : lattice_offsets)
    if (!std::isfinite(v)) return false;
  return true;
}

void SeedLossWeights::validate() const {
  for (double v : {rot, t, def, reg, v3d, p2d}) {
    if (!std::isfinite(v) || v < 0.0)
      throw Error(ErrorKind::InvalidArgument, "losses.weights", "loss weights must be finite and non-negative");
  }
}

double rotation_loss(const Vec6& pred, const Rotation& gt) { return geodesic_distance(orthonormalize_6d(pred), gt); }

double translation_loss(const Vec3& pred, const Vec3& gt) { return (pred - gt).squaredNorm(); }

Vec3 translation_loss_gradient(const Vec3& pred, const Vec3& gt) { return 2.0 * (pred - gt); }

double deformation_loss(const Offsets& pred, const Offsets& gt) {
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) sum += (pred[k] - gt[k]) * (pred[k] - gt[k]);
  return sum / kComponents;
}

Offsets deformation_loss_gradient(const Offsets& pred, const Offsets& gt) {
  Offsets g{};
  for (std::size_t k = 0; k < pred.size(); ++k) g[k] = 2.0 * (pred[k] - gt[k]) / kComponents;
  return g;
}

double deformation_reg(const Offsets& pred) {
  double sum = 0.0;
  for (double v : pred) sum += v * v;
  return sum / kComponents;
}

Offsets deformation_reg_gradient(const Offsets& pred) {
  Offsets g{};
  for (std::size_t k = 0; k < pred.size(); ++k) g[k] = 2.0 * pred[k] / kComponents;
  return g;
}

double vertex3d_loss(const SeedPrediction& pred, const SeedTarget& tgt) {
  const PosedPair p = posed_vertices(pred, tgt);
  if (p.pred.empty()) throw Error(ErrorKind::EmptyMesh, "losses.vertex3d", "target mesh has no vertices");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.pred.size(); ++i) sum += (p.pred[i] - p.gt[i]).squaredNorm();
  return sum / static_cast<double>(p.pred.size());
}

double projection2d_loss(const SeedPrediction& pred, const SeedTarget& tgt) {
  const PosedPair p = posed_vertices(pred, tgt);
  if (p.pred.empty()) throw Error(ErrorKind::EmptyMesh, "losses.projection2d", "target mesh has no vertices");
  const Vec2 scale(1.0 / tgt.intrinsics.width, 1.0 / tgt.intrinsics.height);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.pred.size(); ++i) {
    const Vec2 a = project(p.pred[i], tgt.intrinsics).cwiseProduct(scale);
    const Vec2 b = project(p.gt[i], tgt.intrinsics).cwiseProduct(scale);
    sum += (a - b).squaredNorm();
  }
  return sum / static_cast<double>(p.pred.size());
}

SeedLossBreakdown total_loss(const SeedPrediction& pred, const SeedTarget& tgt, const SeedLossWeights& w) {
  w.validate();
  SeedLossBreakdown b;
  b.rot = rotation_loss(pred.rotation6d, tgt.rotation);
  b.t = translation_loss(decode_crop_translation(pred.translation_code, tgt.crop, tgt.intrinsics), tgt.translation);
  b.def = deformation_loss(pred.lattice_offsets, tgt.lattice_offsets);
  b.reg = deformation_reg(pred.lattice_offsets);
  b.v3d = vertex3d_loss(pred, tgt);
  b.p2d = projection2d_loss(pred, tgt);
  b.total = w.rot * b.rot + w.t * b.t + w.def * b.def + w.reg * b.reg + w.v3d * b.v3d + w.p2d * b.p2d;
  return b;
}

SeedPrediction perfect_prediction(const SeedTarget& tgt) {
  SeedPrediction p;
  p.rotation6d = to_6d(tgt.rotation);
  p.translation_code = encode_crop_translation(tgt.translation, tgt.crop, tgt.intrinsics);
  p.lattice_offsets = tgt.lattice_offsets;
  return p;
}

}  // namespace defpose::losses
