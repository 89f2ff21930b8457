#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "defpose/geometry.hpp"

namespace defpose {

/// dx² + dy² + dz², evaluated in this order everywhere in the library so
/// tree and brute-force searches produce bit-identical minima.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Static 3-d tree for exact nearest-neighbor queries.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  explicit KdTree(std::span<const Vec3> points);

  /// Exact nearest neighbor; among equidistant points the lowest index wins.
  /// The tree must be non-empty.
  Hit nearest(const Vec3& query) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    std::size_t begin = 0;  // range into order_
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace defpose
