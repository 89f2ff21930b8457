#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "defpose/geometry.hpp"
#include "defpose/kdtree.hpp"
#include "defpose/mesh.hpp"

namespace defpose {

/// Predicted and ground-truth object, each with its own canonical mesh and
/// object-to-camera pose.
struct EvalPair {
  TriMesh pred_mesh;
  Pose pred_pose;
  TriMesh gt_mesh;
  Pose gt_pose;
  std::size_t sample_count = 2048;
  std::uint64_t seed = 0;
};

/// Points each metric runs on. Identical meshes (same vertex array) use
/// their vertices with index correspondence. Otherwise both meshes are
/// surface-sampled with `sample_count` points from named sub-streams of
/// `seed` ("pred" and "gt").
struct EvalPoints {
  std::vector<Vec3> pred;
  std::vector<Vec3> gt;
  bool same_mesh = false;
};

EvalPoints eval_points(const EvalPair& p);

std::vector<Vec3> transform_points(std::span<const Vec3> points, const Pose& pose);

/// Mean over i of ‖a_i − b_i‖. Throws EmptyMesh / LengthMismatch.
double mean_corresponding_distance(std::span<const Vec3> a, std::span<const Vec3> b);
/// Mean over `from` of the distance to the nearest point of `to`.
double mean_nearest_distance(std::span<const Vec3> from, const KdTree& to);

/// ADD in millimeters. Across different meshes the correspondence is fixed
/// in the canonical frames: each predicted sample is paired with its
/// nearest ground-truth sample, then both are posed.
double add_metric(const EvalPair& p);
/// ADD-S in millimeters: mean over posed ground-truth points of the distance
/// to the closest posed predicted point.
double adds_metric(const EvalPair& p);
/// Symmetric Chamfer distance in millimeters:
/// ½·(mean NN pred→gt + mean NN gt→pred).
double chamfer_metric(const EvalPair& p);

struct InstanceMetrics {
  std::string category;
  std::string instance;
  double add = 0.0;  ///< mm
  double adds = 0.0;
  double chamfer = 0.0;
};

InstanceMetrics evaluate(const EvalPair& p, std::string category, std::string instance);

struct CategoryMetrics {
  std::string category;
  std::size_t count = 0;
  double add = 0.0;
  double adds = 0.0;
  double chamfer = 0.0;
};

struct MetricsReport {
  std::vector<InstanceMetrics> instances;
  std::vector<CategoryMetrics> categories;  ///< in order of first appearance
  double add = 0.0;                          ///< mean of category means
  double adds = 0.0;
  double chamfer = 0.0;
};

/// Unweighted per-category means, overall = mean of the category means.
/// Throws EmptyInput.
MetricsReport aggregate(const std::vector<InstanceMetrics>& instances);

/// scope,category,instance,add_mm,adds_mm,chamfer_mm rows for instances,
/// categories and the overall average.
std::string format_metrics_csv(const MetricsReport& report);
/// Aligned text table with ADD / ADD-S / Ch. per category plus Average.
std::string format_metrics_table(const MetricsReport& report, const std::string& method = "result");

}  // namespace defpose
