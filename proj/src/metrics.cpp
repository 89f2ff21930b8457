#include "defpose/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "defpose/error.hpp"
#include "defpose/random.hpp"

namespace defpose {

namespace {

constexpr double kMillimeters = 1000.0;

void require_points(std::span<const Vec3> pts, const char* where) {
  if (pts.empty()) throw Error(ErrorKind::EmptyMesh, where, "no points to evaluate");
}

}  // namespace

EvalPoints eval_points(const EvalPair& p) {
  if (p.pred_mesh.empty() || p.gt_mesh.empty()) throw Error(ErrorKind::EmptyMesh, "metrics.eval_points", "empty mesh");
  if (p.sample_count == 0) throw Error(ErrorKind::InvalidArgument, "metrics.eval_points", "sample_count must be at least 1");
  EvalPoints out;
  out.same_mesh = p.pred_mesh.vertices() == p.gt_mesh.vertices();
  if (out.same_mesh) {
    out.pred = p.pred_mesh.vertices();
    out.gt = p.gt_mesh.vertices();
  } else {
    out.pred = sample_surface(p.pred_mesh, p.sample_count, derive_seed(p.seed, "pred"));
    out.gt = sample_surface(p.gt_mesh, p.sample_count, derive_seed(p.seed, "gt"));
  }
  return out;
}

std::vector<Vec3> transform_points(std::span<const Vec3> points, const Pose& pose) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.apply(p));
  return out;
}

double mean_corresponding_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, "metrics.add");
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "metrics.add", "correspondence sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::sqrt(squared_distance(a[i], b[i]));
  return sum / static_cast<double>(a.size());
}

double mean_nearest_distance(std::span<const Vec3> from, const KdTree& to) {
  require_points(from, "metrics.nearest");
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(to.nearest(p).squared_distance);
  return sum / static_cast<double>(from.size());
}

double add_metric(const EvalPair& p) {
  const EvalPoints pts = eval_points(p);
  const auto pred_posed = transform_points(pts.pred, p.pred_pose);
  if (pts.same_mesh) return kMillimeters * mean_corresponding_distance(pred_posed, transform_points(pts.gt, p.gt_pose));
  const KdTree gt_canonical(pts.gt);
  std::vector<Vec3> matched;
  matched.reserve(pts.pred.size());
  for (const auto& x : pts.pred) matched.push_back(p.gt_pose.apply(pts.gt[gt_canonical.nearest(x).index]));
  return kMillimeters * mean_corresponding_distance(pred_posed, matched);
}

double adds_metric(const EvalPair& p) {
  const EvalPoints pts = eval_points(p);
  const KdTree pred_tree(transform_points(pts.pred, p.pred_pose));
  return kMillimeters * mean_nearest_distance(transform_points(pts.gt, p.gt_pose), pred_tree);
}

double chamfer_metric(const EvalPair& p) {
  const EvalPoints pts = eval_points(p);
  const auto pred = transform_points(pts.pred, p.pred_pose);
  const auto gt = transform_points(pts.gt, p.gt_pose);
  const double forward = mean_nearest_distance(pred, KdTree(gt));
  const double backward = mean_nearest_distance(gt, KdTree(pred));
  return kMillimeters * 0.5 * (forward + backward);
}

InstanceMetrics evaluate(const EvalPair& p, std::string category, std::string instance) {
  return {std::move(category), std::move(instance), add_metric(p), adds_metric(p), chamfer_metric(p)};
}

MetricsReport aggregate(const std::vector<InstanceMetrics>& instances) {
  if (instances.empty()) throw Error(ErrorKind::EmptyInput, "metrics.aggregate", "no instances to aggregate");
  MetricsReport report;
  report.instances = instances;
  for (const auto& m : instances) {
    auto it = std::find_if(report.categories.begin(), report.categories.end(),
                           [&](const CategoryMetrics& c) { return c.category == m.category; });
    if (it == report.categories.end()) {
      report.categories.push_back({m.category, 0, 0.0, 0.0, 0.0});
      it = std::prev(report.categories.end());
    }
    ++it->count;
    it->add += m.add;
    it->adds += m.adds;
    it->chamfer += m.chamfer;
  }
  for (auto& c : report.categories) {
    const auto n = static_cast<double>(c.count);
    c.add /= n;
    c.adds /= n;
    c.chamfer /= n;
    report.add += c.add;
    report.adds += c.adds;
    report.chamfer += c.chamfer;
  }
  const auto k = static_cast<double>(report.categories.size());
  report.add /= k;
  report.adds /= k;
  report.chamfer /= k;
  return report;
}

namespace {

std::string number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  if (s.size() >= width) return s;
  return std::string(width - s.size(), ' ') + s;
}

std::string center(const std::string& s, std::size_t width) {
  if (s.size() >= width) return s;
  const std::size_t left = (width - s.size()) / 2;
  return std::string(left, ' ') + s + std::string(width - s.size() - left, ' ');
}

}  // namespace

std::string format_metrics_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "scope,category,instance,add_mm,adds_mm,chamfer_mm\n";
  for (const auto& m : report.instances) {
    os << "instance," << m.category << ',' << m.instance << ',' << number(m.add) << ',' << number(m.adds) << ','
       << number(m.chamfer) << '\n';
  }
  for (const auto& c : report.categories) {
    os << "category," << c.category << ",," << number(c.add) << ',' << number(c.adds) << ',' << number(c.chamfer)
       << '\n';
  }
  os << "overall,,," << number(report.add) << ',' << number(report.adds) << ',' << number(report.chamfer) << '\n';
  return os.str();
}

std::string format_metrics_table(const MetricsReport& report, const std::string& method) {
  constexpr std::size_t kCol = 7;
  constexpr std::size_t kGroup = 3 * kCol;
  std::size_t label = std::max<std::size_t>(method.size(), 6) + 1;
  std::string top = std::string(label, ' ');
  std::string mid = "Method" + std::string(label - 6, ' ');
  std::string row = method + std::string(label - method.size(), ' ');
  const auto add_group = [&](const std::string& name, double add, double adds, double ch) {
    top += "|" + center(name, kGroup);
    mid += "|" + pad("ADD", kCol) + pad("ADD-S", kCol) + pad("Ch.", kCol);
    row += "|" + pad(fixed1(add), kCol) + pad(fixed1(adds), kCol) + pad(fixed1(ch), kCol);
  };
  for (const auto& c : report.categories) add_group(c.category, c.add, c.adds, c.chamfer);
  add_group("Average", report.add, report.adds, report.chamfer);
  const std::string rule(top.size(), '-');
  return top + "\n" + mid + "\n" + rule + "\n" + row + "\n";
}

}  // namespace defpose
