// defpose command-line front end.
//
// Settings are resolved in three layers: built-in defaults, then command-line
// flags, then the JSON file given with --config. A key present in the config
// file wins over the matching flag.

#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "defpose/error.hpp"
#include "defpose/harness.hpp"
#include "defpose/lattice.hpp"
#include "defpose/metrics.hpp"
#include "defpose/protocol.hpp"
#include "defpose/random.hpp"
#include "defpose/seed_losses.hpp"
#include "defpose/serialization.hpp"
#include "defpose/silhouette.hpp"

namespace {

using namespace defpose;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

void emit(const std::string& text, const std::string& path) {
  if (path.empty())
    std::cout << text;
  else
    write_text(text, path);
}

TriMesh base_mesh(const std::string& path, const std::string& primitive) {
  if (!path.empty()) return load_mesh(path);
  if (primitive == "produce") return primitives::produce();
  if (primitive == "ridged-produce") return primitives::ridged_produce();
  if (primitive == "cube") return primitives::cube(0.08);
  if (primitive == "sphere") return primitives::uv_sphere(0.04, 16, 24);
  throw Error(ErrorKind::InvalidArgument, "cli.mesh", "unknown primitive '" + primitive + "'");
}

/// Accepts either 16 numbers or an object with a "pose" field.
Pose read_pose(const std::string& path) {
  const Json j = read_json(path);
  return pose_from_json(j.is_object() ? get_field<Json>(j, "pose", "cli.pose") : j);
}

// ---------------------------------------------------------------------------

struct MakeSceneArgs {
  std::string out, mesh, primitive = "ridged-produce", config;
  SceneConfig cfg;
};

void add_make_scene(CLI::App& app, MakeSceneArgs& a) {
  auto* c = app.add_subcommand("make-scene", "Build a synthetic annotation scene with known ground truth");
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--mesh", a.mesh, "Base mesh (OBJ or PLY); overrides --primitive");
  c->add_option("--primitive", a.primitive, "produce, ridged-produce, cube or sphere")->capture_default_str();
  c->add_option("--seed", a.cfg.seed, "Root seed")->capture_default_str();
  c->add_option("--frames", a.cfg.frame_count, "Number of views")->capture_default_str();
  c->add_option("--image-size", a.cfg.image_size, "Square mask size in pixels")->capture_default_str();
  c->add_option("--focal", a.cfg.focal, "Focal length in pixels")->capture_default_str();
  c->add_option("--deformation-fraction", a.cfg.deformation_fraction, "Max corner offset / box diagonal")
      ->capture_default_str();
  c->add_option("--sigma-t", a.cfg.noise.sigma_t, "Translation noise, meters")->capture_default_str();
  c->add_option("--sigma-r", a.cfg.noise.sigma_r, "Rotation noise, radians")->capture_default_str();
  c->add_option("--outlier-fraction", a.cfg.noise.outlier_fraction, "Fraction of gross outliers")->capture_default_str();
  c->add_option("--config", a.config, "Scene config JSON (overrides flags)");
}

int run_make_scene(MakeSceneArgs& a) {
  if (!a.config.empty()) apply_json(a.cfg, read_json(a.config));
  const auto scene = build_scene(base_mesh(a.mesh, a.primitive), a.cfg);
  save_scene(scene, a.out);
  write_json(scene_config_to_json(a.cfg), std::filesystem::path(a.out) / "scene_config.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct AnnotateArgs {
  std::string scene, out, loss_log, config;
  OptimizerConfig opt;
  InlierConfig inl;
  bool average = false;
};

void add_annotate(CLI::App& app, AnnotateArgs& a) {
  auto* c = app.add_subcommand("annotate", "Refine per-frame pose hypotheses and select the consensus");
  c->add_option("--scene", a.scene, "scene.json")->required();
  c->add_option("--out", a.out, "Result JSON (stdout when omitted)");
  c->add_option("--loss-log", a.loss_log, "Per-iteration objective CSV");
  c->add_option("--lambda", a.opt.lambda, "Consistency weight")->capture_default_str();
  c->add_option("--w-dice", a.opt.w_dice)->capture_default_str();
  c->add_option("--w-dt", a.opt.w_dt)->capture_default_str();
  c->add_option("--max-iterations", a.opt.max_iterations)->capture_default_str();
  c->add_option("--threads", a.opt.threads, "0 uses every core")->capture_default_str();
  c->add_option("--translation-threshold", a.inl.translation_threshold, "Inlier threshold, meters")
      ->capture_default_str();
  c->add_option("--rotation-threshold", a.inl.rotation_threshold, "Inlier threshold, radians")->capture_default_str();
  c->add_flag("--average-inliers", a.average, "Report the mean inlier pose instead of the winning hypothesis");
  c->add_option("--config", a.config,
                "JSON with optional \"optimizer\", \"inliers\" and \"average_inliers\" entries (overrides flags)");
}

int run_annotate(AnnotateArgs& a) {
  if (!a.config.empty()) {
    const Json j = read_json(a.config);
    apply_fields(j,
                 {{"optimizer", [&](const Json& v) { apply_json(a.opt, v); }},
                  {"inliers", [&](const Json& v) { apply_json(a.inl, v); }},
                  {"average_inliers", [&](const Json& v) { a.average = v.get<bool>(); }}},
                 "cli.annotate");
  }
  const auto scene = load_scene(a.scene);
  const auto r = annotate(scene, a.opt, a.inl, a.average);
  emit(format_json(annotation_to_json(r, a.opt, a.inl)), a.out);
  if (!a.loss_log.empty()) write_text(format_loss_log(r.optimization), a.loss_log);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest, csv, table, method = "result";
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* c = app.add_subcommand("eval", "ADD / ADD-S / Chamfer over a manifest of instances");
  c->add_option("--manifest", a.manifest, "Manifest JSON")->required();
  c->add_option("--csv", a.csv, "Metrics CSV (stdout when neither output is given)");
  c->add_option("--table", a.table, "Per-category table; '-' prints to stdout");
  c->add_option("--method", a.method, "Row label in the table")->capture_default_str();
}

int run_eval_cmd(const EvalArgs& a) {
  const auto report = run_eval(a.manifest);
  if (!a.csv.empty() || a.table.empty()) emit(format_metrics_csv(report), a.csv);
  if (!a.table.empty()) emit(format_metrics_table(report, a.method), a.table == "-" ? "" : a.table);
  return 0;
}

// ---------------------------------------------------------------------------

struct DeformArgs {
  std::string mesh, out, deformation, deformation_out, blend = "quintic";
  double fraction = 0.04;
  std::uint64_t seed = 0;
  bool canonical = false;
};

void add_deform(CLI::App& app, DeformArgs& a) {
  auto* c = app.add_subcommand("deform", "Apply a 2x2x2 lattice deformation to a mesh");
  c->add_option("--mesh", a.mesh, "Input mesh (OBJ or PLY)")->required();
  c->add_option("--out", a.out, "Output mesh; the extension picks the format")->required();
  c->add_option("--deformation", a.deformation,
                "Deformation JSON {offsets, box?, blend?}; random offsets are drawn when omitted");
  c->add_option("--fraction", a.fraction, "Max random corner offset / box diagonal")->capture_default_str();
  c->add_option("--seed", a.seed, "Root seed for random offsets")->capture_default_str();
  c->add_option("--blend", a.blend, "quintic or trilinear")->capture_default_str();
  c->add_flag("--canonicalize", a.canonical, "Rigidly re-align the result to the input mesh");
  c->add_option("--deformation-out", a.deformation_out, "Write the applied deformation as JSON");
}

int run_deform(const DeformArgs& a) {
  const TriMesh mesh = load_mesh(a.mesh);
  DeformationRecord rec;
  rec.box = bounding_box(mesh);
  rec.blend = parse_lattice_blend(a.blend);
  if (!a.deformation.empty()) {
    const Json j = read_json(a.deformation);
    const bool has_box = j.is_object() && j.contains("box");
    const bool has_blend = j.is_object() && j.contains("blend");
    DeformationRecord given = deformation_from_json(j);
    rec.deformation = given.deformation;
    if (has_box) rec.box = given.box;
    if (has_blend) rec.blend = given.blend;
  } else {
    rec.deformation = sample_deformation(DeformationBounds{a.fraction}, rec.box, derive_seed(a.seed, "deformation"));
  }
  TriMesh out = deform(mesh, rec.box, rec.deformation, rec.blend);
  if (a.canonical) out = canonicalize(mesh, out);
  save_mesh(out, a.out);
  if (!a.deformation_out.empty()) write_json(deformation_to_json(rec), a.deformation_out);
  return 0;
}

// ---------------------------------------------------------------------------

struct ProtocolArgs {
  std::string out, config;
  ProtocolSpec spec;
};

void add_protocol(CLI::App& app, ProtocolArgs& a) {
  auto* c = app.add_subcommand("protocol", "Generate the camera placements of the capture protocol");
  c->add_option("--out", a.out, "Placements JSON (stdout when omitted)");
  c->add_option("--radii", a.spec.radii, "Camera distances, meters")->capture_default_str();
  c->add_option("--elevations", a.spec.lateral_elevations, "Lateral elevations, degrees")->capture_default_str();
  c->add_option("--azimuth-count", a.spec.azimuth_count)->capture_default_str();
  c->add_option("--arc-span", a.spec.arc_span, "Degrees")->capture_default_str();
  c->add_option("--topdown-count", a.spec.topdown_count)->capture_default_str();
  c->add_option("--config", a.config, "Protocol spec JSON (overrides flags)");
}

int run_protocol(ProtocolArgs& a) {
  if (!a.config.empty()) {
    const Json j = read_json(a.config);
    ProtocolSpec merged = a.spec;
    Json base = protocol_spec_to_json(merged);
    base.update(j);
    a.spec = protocol_spec_from_json(base);
  }
  emit(format_json(placements_to_json(a.spec, generate_protocol(a.spec))), a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string mesh, pose, intrinsics, out;
  int width = 256, height = 256;
  double focal = 450.0;
  bool binary = false;
};

void add_render(CLI::App& app, RenderArgs& a) {
  auto* c = app.add_subcommand("render-sil", "Render the coverage silhouette of a posed mesh to PGM");
  c->add_option("--mesh", a.mesh, "Mesh (OBJ or PLY)")->required();
  c->add_option("--pose", a.pose, "Object-in-camera pose JSON")->required();
  c->add_option("--out", a.out, "Output PGM")->required();
  c->add_option("--intrinsics", a.intrinsics, "Intrinsics JSON; overrides the size and focal flags");
  c->add_option("--width", a.width)->capture_default_str();
  c->add_option("--height", a.height)->capture_default_str();
  c->add_option("--focal", a.focal, "Pixels; the principal point is the image center")->capture_default_str();
  c->add_flag("--binarize", a.binary, "Threshold coverage at 0.5");
}

int run_render(const RenderArgs& a) {
  CameraIntrinsics k;
  if (!a.intrinsics.empty()) {
    k = intrinsics_from_json(read_json(a.intrinsics));
  } else {
    k.fx = k.fy = a.focal;
    k.cx = 0.5 * a.width;
    k.cy = 0.5 * a.height;
    k.width = a.width;
    k.height = a.height;
    k.validate();
  }
  Mask m = rasterize_silhouette(load_mesh(a.mesh), read_pose(a.pose), k);
  write_pgm(a.binary ? binarize(m) : m, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct LossesArgs {
  std::string out, config;
  std::uint64_t seed = 0;
  double perturbation = 0.01;
  losses::SeedLossWeights weights;
};

void add_losses(CLI::App& app, LossesArgs& a) {
  auto* c = app.add_subcommand("losses-check",
                               "Evaluate the training losses on a random target, exactly and with a perturbed prediction");
  c->add_option("--seed", a.seed)->capture_default_str();
  c->add_option("--perturbation", a.perturbation, "Noise scale of the perturbed prediction")->capture_default_str();
  c->add_option("--out", a.out, "Result JSON (stdout when omitted)");
  c->add_option("--config", a.config, "Loss weights JSON {rot, t, def, reg, v3d, p2d}");
}

int run_losses(LossesArgs& a) {
  if (!a.config.empty()) apply_json(a.weights, read_json(a.config));
  Rng rng(derive_seed(a.seed, "losses"));
  losses::SeedTarget tgt;
  tgt.mesh = primitives::produce(0.09, 8, 12);
  tgt.box = bounding_box(tgt.mesh);
  Vec3 axis = rng.unit_vector();
  tgt.rotation = Rotation::exp(rng.uniform(0.0, std::numbers::pi) * axis);
  tgt.translation = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.4, 0.8));
  for (auto& o : tgt.lattice_offsets) o = rng.uniform(-0.005, 0.005);
  tgt.intrinsics = CameraIntrinsics{600.0, 600.0, 320.0, 240.0, 640, 480};
  const Vec2 c = project(tgt.translation, tgt.intrinsics);
  tgt.crop = CropGeometry{c.x(), c.y(), 160.0, 160.0, 640.0, 480.0};

  const losses::SeedPrediction exact = losses::perfect_prediction(tgt);
  losses::SeedPrediction noisy = exact;
  for (int i = 0; i < 6; ++i) noisy.rotation6d[i] += a.perturbation * rng.normal();
  for (int i = 0; i < 3; ++i) noisy.translation_code[i] += a.perturbation * rng.normal();
  for (auto& o : noisy.lattice_offsets) o += a.perturbation * 0.1 * rng.normal();

  const Json out = {{"seed", a.seed},
                    {"weights", {{"rot", a.weights.rot}, {"t", a.weights.t}, {"def", a.weights.def},
                                 {"reg", a.weights.reg}, {"v3d", a.weights.v3d}, {"p2d", a.weights.p2d}}},
                    {"exact", loss_breakdown_to_json(losses::total_loss(exact, tgt, a.weights))},
                    {"perturbed", loss_breakdown_to_json(losses::total_loss(noisy, tgt, a.weights))}};
  emit(format_json(out), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose and deformation annotation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "defpose 1.0");

  MakeSceneArgs make_scene;
  AnnotateArgs annotate_args;
  EvalArgs eval;
  DeformArgs deform_args;
  ProtocolArgs protocol;
  RenderArgs render;
  LossesArgs losses_args;
  add_make_scene(app, make_scene);
  add_annotate(app, annotate_args);
  add_eval(app, eval);
  add_deform(app, deform_args);
  add_protocol(app, protocol);
  add_render(app, render);
  add_losses(app, losses_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "make-scene") return run_make_scene(make_scene);
    if (cmd == "annotate") return run_annotate(annotate_args);
    if (cmd == "eval") return run_eval_cmd(eval);
    if (cmd == "deform") return run_deform(deform_args);
    if (cmd == "protocol") return run_protocol(protocol);
    if (cmd == "render-sil") return run_render(render);
    return run_losses(losses_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.where() << ": " << to_string(e.kind()) << ": " << e.message() << '\n';
    return is_numerical(e.kind()) ? kExitNumerical : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: cli." << cmd << ": " << e.what() << '\n';
    return kExitData;
  }
}
