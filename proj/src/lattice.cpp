#include "defpose/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "defpose/error.hpp"
#include "defpose/random.hpp"

namespace defpose {

std::string_view to_string(LatticeBlend blend) {
  return blend == LatticeBlend::Quintic ? "quintic" : "trilinear";
}

LatticeBlend parse_lattice_blend(std::string_view name) {
  if (name == "quintic") return LatticeBlend::Quintic;
  if (name == "trilinear") return LatticeBlend::Trilinear;
  throw Error(ErrorKind::InvalidArgument, "lattice.blend", "unknown blend function '" + std::string(name) + "'");
}

void LatticeDeformation::set_corner(int c, const Vec3& d) {
  offsets[3 * c] = d.x();
  offsets[3 * c + 1] = d.y();
  offsets[3 * c + 2] = d.z();
}

bool LatticeDeformation::is_finite() const {
  return std::all_of(offsets.begin(), offsets.end(), [](double v) { return std::isfinite(v); });
}

void DeformationBounds::validate() const {
  if (!(max_offset_fraction >= 0.0 && max_offset_fraction <= 0.5)) {
    throw Error(ErrorKind::InvalidArgument, "lattice.bounds", "max_offset_fraction must lie in [0, 0.5]");
  }
}

double blend_value(double t, LatticeBlend blend) {
  if (blend == LatticeBlend::Trilinear) return t;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

std::array<double, 8> lattice_weights(const Vec3& t, LatticeBlend blend) {
  std::array<double, 3> hi{};
  std::array<double, 3> lo{};
  for (int k = 0; k < 3; ++k) {
    hi[k] = blend_value(t[k], blend);
    lo[k] = 1.0 - hi[k];
  }
  std::array<double, 8> w{};
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 2; ++iy)
      for (int iz = 0; iz < 2; ++iz) {
        w[LatticeDeformation::corner_index(ix, iy, iz)] =
            (ix ? hi[0] : lo[0]) * (iy ? hi[1] : lo[1]) * (iz ? hi[2] : lo[2]);
      }
  return w;
}

Vec3 lattice_coordinates(const Vec3& p, const Aabb& box) {
  constexpr double kSlack = 1e-9;
  if (!box.contains(p, kSlack)) {
    throw Error(ErrorKind::VertexOutsideLattice, "lattice.deform", "vertex lies outside the lattice box");
  }
  Vec3 t;
  for (int k = 0; k < 3; ++k) {
    const double extent = box.max[k] - box.min[k];
    t[k] = extent > 0.0 ? std::clamp((p[k] - box.min[k]) / extent, 0.0, 1.0) : 0.0;
  }
  return t;
}

Vec3 lattice_displacement(const Vec3& p, const Aabb& box, const LatticeDeformation& d, LatticeBlend blend) {
  const auto w = lattice_weights(lattice_coordinates(p, box), blend);
  Vec3 out = Vec3::Zero();
  for (int c = 0; c < LatticeDeformation::kCorners; ++c) out += w[c] * d.corner(c);
  return out;
}

TriMesh deform(const TriMesh& mesh, const Aabb& box, const LatticeDeformation& d, LatticeBlend blend) {
  if (!d.is_finite()) throw Error(ErrorKind::InvalidArgument, "lattice.deform", "non-finite lattice offsets");
  std::vector<Vec3> out;
  out.reserve(mesh.vertices().size());
  for (const auto& v : mesh.vertices()) out.push_back(v + lattice_displacement(v, box, d, blend));
  return mesh.with_vertices(std::move(out));
}

namespace {

Eigen::Matrix3Xd centered(std::span<const Vec3> pts, Vec3& mean) {
  mean.setZero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3Xd m(3, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i] - mean;
  return m;
}

bool rank_below_two(const Eigen::Matrix3Xd& c) {
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Mat3>(c * c.transpose()).singularValues();
  return !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0];
}

}  // namespace

Pose umeyama_align(std::span<const Vec3> source, std::span<const Vec3> target) {
  const char* where = "lattice.umeyama_align";
  if (source.size() != target.size()) throw Error(ErrorKind::DegenerateConfiguration, where, "point counts differ");
  if (source.size() < 3) throw Error(ErrorKind::DegenerateConfiguration, where, "need at least 3 point pairs");
  Vec3 mu_s, mu_t;
  const Eigen::Matrix3Xd s = centered(source, mu_s);
  const Eigen::Matrix3Xd t = centered(target, mu_t);
  if (rank_below_two(s) || rank_below_two(t)) {
    throw Error(ErrorKind::DegenerateConfiguration, where, "points are collinear or coincident");
  }
  const Mat3 cov = t * s.transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2, 2) = -1.0;
  Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  // One polar re-orthonormalization step removes SVD round-off.
  r = 0.5 * (r + r.inverse().transpose());
  Pose out;
  out.rotation = Rotation::from_matrix(r, 1e-9);
  out.translation = mu_t - r * mu_s;
  return out;
}

TriMesh canonicalize(const TriMesh& base, const TriMesh& deformed) {
  if (base.vertices().size() != deformed.vertices().size() || base.triangles() != deformed.triangles()) {
    throw Error(ErrorKind::InvalidArgument, "lattice.canonicalize", "meshes must share topology");
  }
  const Pose align = umeyama_align(deformed.vertices(), base.vertices());
  return deformed.transformed(align);
}

LatticeDeformation sample_deformation(const DeformationBounds& bounds, const Aabb& box, std::uint64_t seed) {
  bounds.validate();
  const double half_width = bounds.max_offset_fraction * box.diagonal();
  LatticeDeformation d;
  Rng rng(seed);
  for (auto& v : d.offsets) v = half_width * (2.0 * rng.uniform01() - 1.0);
  return d;
}

}  // namespace defpose
