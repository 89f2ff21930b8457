#pragma once

// Brute-force references and fixture generators. Nothing here calls the
// library code under test except plain data types.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "defpose/geometry.hpp"
#include "defpose/mesh.hpp"
#include "defpose/silhouette.hpp"

namespace oracle {

using defpose::Mask;
using defpose::Vec3;

// Test-only generator; the library's Rng is deliberately not reused.
struct Gen {
  std::mt19937_64 e;
  explicit Gen(std::uint64_t seed) : e(seed) {}
  double uni(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(e); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(e); }
  double gauss() { return std::normal_distribution<double>(0.0, 1.0)(e); }
  Vec3 vec(double lo, double hi) { return {uni(lo, hi), uni(lo, hi), uni(lo, hi)}; }
  Vec3 direction() {
    Vec3 v;
    do v = Vec3(gauss(), gauss(), gauss());
    while (v.norm() < 1e-6);
    return v.normalized();
  }
};

inline double sq(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Index of the nearest point, lowest index on ties.
inline std::size_t nearest_index(const Vec3& q, const std::vector<Vec3>& pts) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double s = sq(q, pts[j]);
    if (s < d) {
      d = s;
      best = j;
    }
  }
  return best;
}

inline double mean_nn(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(sq(p, to[nearest_index(p, to)]));
  return sum / static_cast<double>(from.size());
}

inline double mean_corr(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::sqrt(sq(a[i], b[i]));
  return sum / static_cast<double>(a.size());
}

inline std::vector<Vec3> posed(const std::vector<Vec3>& pts, const defpose::Pose& p) {
  std::vector<Vec3> out;
  for (const auto& x : pts) out.push_back(p.rotation.matrix() * x + p.translation);
  return out;
}

/// Foreground pixels with an in-image background 4-neighbor.
inline std::vector<bool> boundary(const Mask& m) {
  std::vector<bool> b(m.size(), false);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y) < 0.5) continue;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= m.width || ny[k] >= m.height) continue;
        if (m.at(nx[k], ny[k]) < 0.5) b[static_cast<std::size_t>(y) * m.width + x] = true;
      }
    }
  return b;
}

/// All-pairs exact distance to the nearest boundary pixel.
inline std::vector<double> distance_field(const Mask& m) {
  const auto b = boundary(m);
  std::vector<double> out(m.size());
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      long best = std::numeric_limits<long>::max();
      for (int v = 0; v < m.height; ++v)
        for (int u = 0; u < m.width; ++u)
          if (b[static_cast<std::size_t>(v) * m.width + u]) best = std::min(best, long((x - u) * (x - u) + (y - v) * (y - v)));
      out[static_cast<std::size_t>(y) * m.width + x] = std::sqrt(static_cast<double>(best));
    }
  return out;
}

/// Random binary mask with at least one boundary pixel.
inline Mask random_mask(Gen& g, int max_side) {
  for (;;) {
    const int w = g.integer(1, max_side), h = g.integer(1, max_side);
    Mask m(w, h);
    const double fill = g.uni(0.05, 0.95);
    if (g.uni() < 0.5) {
      for (auto& v : m.values) v = g.uni() < fill ? 1.0 : 0.0;
    } else {
      const int blobs = g.integer(1, 4);
      for (int k = 0; k < blobs; ++k) {
        const double cx = g.uni(0, w), cy = g.uni(0, h), r = g.uni(1, std::max(2, max_side / 3));
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.at(x, y) = 1.0;
      }
    }
    const auto b = boundary(m);
    for (bool v : b)
      if (v) return m;
  }
}

inline Mask square_mask(int w, int h, int x0, int y0, int side) {
  Mask m(w, h);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) m.at(x, y) = 1.0;
  return m;
}

inline std::vector<Vec3> random_cloud(Gen& g, std::size_t n, double scale) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(g.vec(-scale, scale));
  return pts;
}

/// Rodrigues formula, independent of Rotation::exp.
inline defpose::Mat3 rodrigues(const Vec3& w) {
  const double th = w.norm();
  if (th == 0.0) return defpose::Mat3::Identity();
  const Vec3 k = w / th;
  defpose::Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return defpose::Mat3::Identity() + std::sin(th) * K + (1 - std::cos(th)) * K * K;
}

inline defpose::Rotation random_rotation(Gen& g) {
  return defpose::Rotation::from_matrix(rodrigues(g.direction() * g.uni(0.0, 3.14159)), 1e-9);
}

}  // namespace oracle
