#include "defpose/harness.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "defpose/error.hpp"
#include "defpose/random.hpp"

namespace defpose {

namespace {

constexpr const char* kSceneFormat = "defpose-scene-1";

Rotation random_rotation(Rng& rng) {
  // Normalized Gaussian quaternion: uniform on SO(3).
  Eigen::Quaterniond q;
  do {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    q = Eigen::Quaterniond(w, x, y, z);
  } while (q.norm() < 1e-12);
  q.normalize();
  return Rotation::from_matrix(q.toRotationMatrix(), 1e-9);
}

std::string frame_mask_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "masks/frame_%03zu.pgm", i);
  return buf;
}

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void NoiseSpec::validate() const {
  const char* where = "harness.noise";
  if (!(sigma_t >= 0.0) || !(sigma_r >= 0.0) || !std::isfinite(sigma_t) || !std::isfinite(sigma_r))
    throw Error(ErrorKind::InvalidArgument, where, "noise sigmas must be finite and non-negative");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, where, "outlier fraction must lie in [0, 1]");
  if (!(outlier_min_rotation >= 0.0 && outlier_min_rotation <= std::numbers::pi))
    throw Error(ErrorKind::InvalidArgument, where, "outlier rotation must lie in [0, pi]");
  if (!(outlier_min_translation >= 0.0 && outlier_max_translation >= outlier_min_translation) ||
      !std::isfinite(outlier_max_translation))
    throw Error(ErrorKind::InvalidArgument, where, "outlier translation range is invalid");
}

std::size_t NoiseSpec::outlier_count(std::size_t frames) const {
  return static_cast<std::size_t>(std::lround(outlier_fraction * static_cast<double>(frames)));
}

void SceneConfig::validate() const {
  const char* where = "harness.scene_config";
  if (frame_count < 2) throw Error(ErrorKind::InvalidArgument, where, "a scene needs at least two frames");
  if (image_size < 8) throw Error(ErrorKind::InvalidArgument, where, "image size must be at least 8 pixels");
  if (!(focal > 0.0) || !std::isfinite(focal)) throw Error(ErrorKind::InvalidArgument, where, "focal length must be positive");
  DeformationBounds{deformation_fraction}.validate();
  noise.validate();
  protocol.validate();
  if (frame_count > protocol.placement_count())
    throw Error(ErrorKind::InvalidArgument, where, "more frames requested than the protocol has placements");
}

void apply_json(SceneConfig& cfg, const Json& j) {
  apply_fields(j,
               {{"frame_count", [&](const Json& v) { cfg.frame_count = v.get<std::size_t>(); }},
                {"image_size", [&](const Json& v) { cfg.image_size = v.get<int>(); }},
                {"focal", [&](const Json& v) { cfg.focal = v.get<double>(); }},
                {"deformation_fraction", [&](const Json& v) { cfg.deformation_fraction = v.get<double>(); }},
                {"blend", [&](const Json& v) { cfg.blend = parse_lattice_blend(v.get<std::string>()); }},
                {"seed", [&](const Json& v) { cfg.seed = v.get<std::uint64_t>(); }},
                {"protocol", [&](const Json& v) { cfg.protocol = protocol_spec_from_json(v); }},
                {"sigma_t", [&](const Json& v) { cfg.noise.sigma_t = v.get<double>(); }},
                {"sigma_r", [&](const Json& v) { cfg.noise.sigma_r = v.get<double>(); }},
                {"outlier_fraction", [&](const Json& v) { cfg.noise.outlier_fraction = v.get<double>(); }},
                {"outlier_min_rotation", [&](const Json& v) { cfg.noise.outlier_min_rotation = v.get<double>(); }},
                {"outlier_min_translation", [&](const Json& v) { cfg.noise.outlier_min_translation = v.get<double>(); }},
                {"outlier_max_translation", [&](const Json& v) { cfg.noise.outlier_max_translation = v.get<double>(); }}},
               "harness.scene_config");
}

Json scene_config_to_json(const SceneConfig& cfg) {
  return {{"frame_count", cfg.frame_count},
          {"image_size", cfg.image_size},
          {"focal", cfg.focal},
          {"deformation_fraction", cfg.deformation_fraction},
          {"blend", std::string(to_string(cfg.blend))},
          {"seed", cfg.seed},
          {"protocol", protocol_spec_to_json(cfg.protocol)},
          {"sigma_t", cfg.noise.sigma_t},
          {"sigma_r", cfg.noise.sigma_r},
          {"outlier_fraction", cfg.noise.outlier_fraction},
          {"outlier_min_rotation", cfg.noise.outlier_min_rotation},
          {"outlier_min_translation", cfg.noise.outlier_min_translation},
          {"outlier_max_translation", cfg.noise.outlier_max_translation}};
}

SyntheticScene build_scene(const TriMesh& base_mesh, const SceneConfig& cfg) {
  cfg.validate();
  SyntheticScene scene;
  scene.base_mesh = base_mesh;
  scene.seed = cfg.seed;
  scene.noise = cfg.noise;

  const Aabb box = bounding_box(base_mesh);
  scene.deformation.box = box;
  scene.deformation.blend = cfg.blend;
  scene.deformation.deformation =
      sample_deformation(DeformationBounds{cfg.deformation_fraction}, box, derive_seed(cfg.seed, "deformation"));
  scene.mesh = canonicalize(base_mesh, deform(base_mesh, box, scene.deformation.deformation, cfg.blend));

  Rng scene_rng(derive_seed(cfg.seed, "scene"));
  scene.gt_world_pose = Pose{random_rotation(scene_rng), cfg.protocol.scene_center};

  CameraIntrinsics k;
  k.fx = k.fy = cfg.focal;
  k.cx = k.cy = 0.5 * cfg.image_size;
  k.width = k.height = cfg.image_size;

  const auto placements = generate_protocol(cfg.protocol);
  const std::size_t n = cfg.frame_count;
  scene.frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Pose& extrinsic = placements[i * placements.size() / n].extrinsic;
    Mask mask = binarize(rasterize_silhouette(scene.mesh, compose(extrinsic.inverse(), scene.gt_world_pose), k));
    scene.frames.push_back(FrameObservation::make(extrinsic, k, std::move(mask)));
  }

  Rng noise(derive_seed(cfg.seed, "noise"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t outliers = cfg.noise.outlier_count(n);
  for (std::size_t i = 0; i < outliers; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(noise.below(n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> is_outlier(n, false);
  for (std::size_t i = 0; i < outliers; ++i) is_outlier[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (is_outlier[i]) scene.outliers.push_back(i);

  scene.initial_camera_poses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec6 delta;
    if (is_outlier[i]) {
      const Vec3 axis = noise.unit_vector();
      const double angle = noise.uniform(cfg.noise.outlier_min_rotation, std::numbers::pi);
      const Vec3 dir = noise.unit_vector();
      const double dist = noise.uniform(cfg.noise.outlier_min_translation, cfg.noise.outlier_max_translation);
      delta << angle * axis, dist * dir;
    } else {
      for (int c = 0; c < 3; ++c) delta[c] = cfg.noise.sigma_r * noise.normal();
      for (int c = 3; c < 6; ++c) delta[c] = cfg.noise.sigma_t * noise.normal();
    }
    const Pose world = perturb(scene.gt_world_pose, delta);
    scene.initial_camera_poses.push_back(compose(scene.frames[i].extrinsic.inverse(), world));
  }
  return scene;
}

void save_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "masks", ec);
  if (ec) throw Error(ErrorKind::IoError, "harness.save_scene", "cannot create " + (dir / "masks").string());
  save_mesh(scene.mesh, dir / "mesh.obj");
  save_mesh(scene.base_mesh, dir / "base_mesh.obj");

  Json frames = Json::array();
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const auto& f = scene.frames[i];
    const std::string mask = frame_mask_name(i);
    write_pgm(f.observed_mask, dir / mask);
    frames.push_back({{"extrinsic", pose_to_json(f.extrinsic)},
                      {"intrinsics", intrinsics_to_json(f.intrinsics)},
                      {"mask", mask},
                      {"initial_pose", pose_to_json(scene.initial_camera_poses[i])}});
  }
  const Json noise = {{"sigma_t", scene.noise.sigma_t},
                      {"sigma_r", scene.noise.sigma_r},
                      {"outlier_fraction", scene.noise.outlier_fraction},
                      {"outlier_min_rotation", scene.noise.outlier_min_rotation},
                      {"outlier_min_translation", scene.noise.outlier_min_translation},
                      {"outlier_max_translation", scene.noise.outlier_max_translation}};
  const Json j = {{"format", kSceneFormat},
                  {"seed", scene.seed},
                  {"mesh", "mesh.obj"},
                  {"base_mesh", "base_mesh.obj"},
                  {"deformation", deformation_to_json(scene.deformation)},
                  {"gt_world_pose", pose_to_json(scene.gt_world_pose)},
                  {"noise", noise},
                  {"outliers", scene.outliers},
                  {"frames", std::move(frames)}};
  write_json(j, dir / "scene.json");
}

LoadedScene load_scene(const std::filesystem::path& scene_json) {
  const std::string where = "harness.load_scene";
  const Json j = read_json(scene_json);
  const auto dir = scene_json.parent_path();
  LoadedScene s;
  s.mesh = load_mesh(dir / get_field<std::string>(j, "mesh", where));
  const Json frames = get_field<Json>(j, "frames", where);
  if (!frames.is_array()) throw Error(ErrorKind::ParseError, where, "'frames' must be an array");
  for (const auto& f : frames) {
    const Pose extrinsic = pose_from_json(get_field<Json>(f, "extrinsic", where));
    const CameraIntrinsics k = intrinsics_from_json(get_field<Json>(f, "intrinsics", where));
    Mask mask = read_pgm(dir / get_field<std::string>(f, "mask", where));
    s.frames.push_back(FrameObservation::make(extrinsic, k, std::move(mask)));
    s.initial_camera_poses.push_back(pose_from_json(get_field<Json>(f, "initial_pose", where)));
  }
  if (j.contains("gt_world_pose")) s.gt_world_pose = pose_from_json(j.at("gt_world_pose"));
  if (j.contains("outliers")) s.outliers = get_field<std::vector<std::size_t>>(j, "outliers", where);
  return s;
}

AnnotationResult annotate(const LoadedScene& scene, const OptimizerConfig& opt, const InlierConfig& inl,
                          bool average_inliers) {
  inl.validate();
  AnnotationResult r;
  r.initial = lift_to_world(scene.initial_camera_poses, scene.frames);
  r.optimization = optimize(r.initial, scene.frames, scene.mesh, opt);
  r.selection = select_inliers(r.optimization.poses, inl);
  r.consensus = average_inliers ? mean_pose(r.optimization.poses, r.selection.inliers) : r.selection.consensus;
  if (scene.gt_world_pose) {
    r.translation_error = translation_distance(r.consensus, *scene.gt_world_pose);
    r.rotation_error = geodesic_distance(r.consensus.rotation, scene.gt_world_pose->rotation);
  }
  return r;
}

Json annotation_to_json(const AnnotationResult& r, const OptimizerConfig& opt, const InlierConfig& inl) {
  Json refined = Json::array();
  for (const auto& p : r.optimization.poses.world_poses) refined.push_back(pose_to_json(p));
  Json frozen = Json::array();
  for (std::size_t i = 0; i < r.optimization.frozen.size(); ++i)
    if (r.optimization.frozen[i]) frozen.push_back(i);
  Json out = {{"consensus_pose", pose_to_json(r.consensus)},
              {"winner", r.selection.winner},
              {"inliers", r.selection.inliers},
              {"refined_world_poses", std::move(refined)},
              {"frozen_frames", std::move(frozen)},
              {"iterations", r.optimization.iterations},
              {"initial_objective", r.optimization.log.front().total},
              {"final_objective", r.optimization.log.back().total},
              {"optimizer", optimizer_config_to_json(opt)},
              {"inlier_thresholds",
               {{"translation_threshold", inl.translation_threshold}, {"rotation_threshold", inl.rotation_threshold}}}};
  if (r.translation_error) {
    out["gt_translation_error_mm"] = *r.translation_error * 1000.0;
    out["gt_rotation_error_deg"] = *r.rotation_error * 180.0 / std::numbers::pi;
  }
  return out;
}

std::string format_loss_log(const OptimizeResult& r) {
  std::string out = "iteration,total,alignment,consistency,accepted_steps\n";
  for (const auto& rec : r.log) {
    out += std::to_string(rec.iteration) + ',' + number(rec.total) + ',' + number(rec.alignment) + ',' +
           number(rec.consistency) + ',' + std::to_string(rec.accepted_steps) + '\n';
  }
  return out;
}

MetricsReport run_eval(const std::filesystem::path& manifest) {
  const std::string where = "metrics.eval";
  const Json j = read_json(manifest);
  const auto dir = manifest.parent_path();
  const auto sample_count = j.contains("sample_count") ? get_field<std::size_t>(j, "sample_count", where) : 2048;
  const auto seed = j.contains("seed") ? get_field<std::uint64_t>(j, "seed", where) : 0;
  const Json list = get_field<Json>(j, "instances", where);
  if (!list.is_array()) throw Error(ErrorKind::ParseError, where, "'instances' must be an array");
  std::vector<InstanceMetrics> rows;
  for (const auto& e : list) {
    EvalPair p{load_mesh(dir / get_field<std::string>(e, "pred_mesh", where)),
               pose_from_json(get_field<Json>(e, "pred_pose", where)),
               load_mesh(dir / get_field<std::string>(e, "gt_mesh", where)),
               pose_from_json(get_field<Json>(e, "gt_pose", where)), sample_count, seed};
    rows.push_back(evaluate(p, get_field<std::string>(e, "category", where), get_field<std::string>(e, "instance", where)));
  }
  return aggregate(rows);
}

}  // namespace defpose
