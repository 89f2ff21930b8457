#include "defpose/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "defpose/error.hpp"

namespace defpose {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, -1, 0.0, 0, 0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (!(hi[axis] > lo[axis])) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::size_t node_id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = squared_distance(q, points_[idx]);
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) best = {idx, d};
    }
    return;
  }
  // Left holds values ≤ split, right holds values ≥ split.
  const double diff = q[node.axis] - node.split;
  const std::size_t first = diff <= 0.0 ? node.left : node.right;
  const std::size_t second = diff <= 0.0 ? node.right : node.left;
  search(first, q, best);
  // `<=` keeps equidistant candidates on the far side reachable for the
  // lowest-index tie rule.
  if (diff * diff <= best.squared_distance) search(second, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw Error(ErrorKind::EmptyInput, "metrics.kdtree", "nearest-neighbor query on an empty tree");
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

}  // namespace defpose
