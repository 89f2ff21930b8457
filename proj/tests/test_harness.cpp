#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "defpose/error.hpp"
#include "defpose/harness.hpp"
#include "defpose/serialization.hpp"
#include "oracles.hpp"

using namespace defpose;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("defpose_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

SceneConfig small_config(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.frame_count = 5;
  cfg.image_size = 64;
  cfg.focal = 160.0;
  return cfg;
}

int run(const std::string& args) {
  const std::string cmd = std::string(DEFPOSE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("zero noise starts every hypothesis at the ground truth") {
  const SyntheticScene s = build_scene(primitives::produce(0.09, 8, 10), small_config(3));
  REQUIRE(s.frames.size() == 5);
  CHECK(s.outliers.empty());
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const Pose w = compose(s.frames[i].extrinsic, s.initial_camera_poses[i]);
    CHECK(translation_distance(w, s.gt_world_pose) < 1e-12);
    CHECK(geodesic_distance(w.rotation, s.gt_world_pose.rotation) < 1e-7);
    // Masks are non-empty renders of the object.
    CHECK(*std::max_element(s.frames[i].observed_mask.values.begin(), s.frames[i].observed_mask.values.end()) == 1.0);
  }
}

TEST_CASE("outlier count and selection") {
  SceneConfig cfg = small_config(9);
  cfg.frame_count = 10;
  cfg.noise.outlier_fraction = 0.2;
  cfg.noise.sigma_t = 0.001;
  const SyntheticScene s = build_scene(primitives::produce(0.09, 6, 8), cfg);
  REQUIRE(s.outliers.size() == 2);
  CHECK(s.outliers[0] < s.outliers[1]);
  for (std::size_t i : s.outliers) {
    const Pose w = compose(s.frames[i].extrinsic, s.initial_camera_poses[i]);
    CHECK(geodesic_distance(w.rotation, s.gt_world_pose.rotation) >= cfg.noise.outlier_min_rotation - 1e-9);
    const double d = translation_distance(w, s.gt_world_pose);
    CHECK(d >= cfg.noise.outlier_min_translation - 1e-12);
    CHECK(d <= cfg.noise.outlier_max_translation + 1e-12);
  }
  NoiseSpec n;
  n.outlier_fraction = 0.25;
  CHECK(n.outlier_count(12) == 3);
  n.outlier_fraction = 1.5;
  CHECK_THROWS_AS(n.validate(), Error);
}

TEST_CASE("scenes are reproducible byte for byte") {
  SceneConfig cfg = small_config(17);
  cfg.noise.sigma_t = 0.01;
  cfg.noise.sigma_r = 0.1;
  cfg.noise.outlier_fraction = 0.2;
  const TriMesh base = primitives::ridged_produce(0.09, 8, 12);
  const fs::path a = scratch("scene_a"), b = scratch("scene_b");
  save_scene(build_scene(base, cfg), a);
  save_scene(build_scene(base, cfg), b);
  for (const char* f : {"scene.json", "mesh.obj", "base_mesh.obj", "masks/frame_000.pgm", "masks/frame_004.pgm"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    CHECK(!slurp(a / f).empty());
  }
  cfg.seed = 18;
  const fs::path c = scratch("scene_c");
  save_scene(build_scene(base, cfg), c);
  CHECK(slurp(a / "scene.json") != slurp(c / "scene.json"));

  const LoadedScene loaded = load_scene(a / "scene.json");
  const SyntheticScene orig = build_scene(base, small_config(17));
  CHECK(loaded.frames.size() == 5);
  REQUIRE(loaded.gt_world_pose.has_value());
  CHECK((loaded.gt_world_pose->matrix() - orig.gt_world_pose.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(loaded.frames[2].observed_mask.values == orig.frames[2].observed_mask.values);
}

TEST_CASE("annotating a noise-free scene returns the ground truth") {
  const fs::path dir = scratch("annotate");
  save_scene(build_scene(primitives::produce(0.09, 8, 10), small_config(5)), dir);
  const LoadedScene scene = load_scene(dir / "scene.json");
  OptimizerConfig opt;
  opt.w_dice = 0.0;
  opt.w_dt = 0.0;
  opt.max_iterations = 3;
  opt.threads = 1;
  const AnnotationResult r = annotate(scene, opt, InlierConfig{});
  REQUIRE(r.translation_error.has_value());
  CHECK(*r.translation_error < 1e-6);
  CHECK(*r.rotation_error < 1e-6);
  CHECK(r.selection.inliers.size() == 5);
  const std::string log = format_loss_log(r.optimization);
  CHECK(log.rfind("iteration,total,alignment,consistency,accepted_steps\n0,", 0) == 0);
  const Json j = annotation_to_json(r, opt, InlierConfig{});
  CHECK(j.at("inliers").size() == 5);
  CHECK(j.contains("gt_translation_error_mm"));
}

TEST_CASE("evaluating a prediction against itself") {
  const fs::path dir = scratch("eval");
  save_mesh(primitives::produce(0.09, 8, 10), dir / "m.obj");
  const Pose p{Rotation::about_axis(Vec3(1, 2, 3), 0.4), Vec3(0.1, 0.2, 0.5)};
  Json inst = {{"category", "fruit"}, {"instance", "f0"}, {"pred_mesh", "m.obj"}, {"pred_pose", pose_to_json(p)},
               {"gt_mesh", "m.obj"},  {"gt_pose", pose_to_json(p)}};
  write_json(Json{{"sample_count", 256}, {"instances", Json::array({inst})}}, dir / "manifest.json");
  const MetricsReport r = run_eval(dir / "manifest.json");
  CHECK(r.add == 0.0);
  CHECK(r.adds == 0.0);
  CHECK(r.chamfer == 0.0);

  write_json(Json{{"instances", Json::array({Json{{"category", "x"}}})}}, dir / "bad.json");
  CHECK_THROWS_AS(run_eval(dir / "bad.json"), Error);
}

TEST_CASE("json round trips") {
  oracle::Gen g(81);
  const Pose p{oracle::random_rotation(g), g.vec(-1, 1)};
  const Pose q = pose_from_json(parse_json(format_json(pose_to_json(p)), "test"));
  CHECK(q.matrix() == p.matrix());

  ProtocolSpec s;
  s.radii = {0.4, 0.9};
  s.azimuth_count = 5;
  const ProtocolSpec t = protocol_spec_from_json(protocol_spec_to_json(s));
  CHECK(t.radii == s.radii);
  CHECK(t.azimuth_count == 5);
  CHECK(t.placement_count() == s.placement_count());

  SceneConfig c = small_config(4);
  c.noise.sigma_r = 0.123;
  SceneConfig d;
  apply_json(d, scene_config_to_json(c));
  CHECK(scene_config_to_json(d) == scene_config_to_json(c));

  OptimizerConfig o;
  apply_json(o, Json{{"lambda", 3.5}, {"max_iterations", 7}});
  CHECK(o.lambda == 3.5);
  CHECK(o.max_iterations == 7);
  try {
    apply_json(o, Json{{"lamda", 1.0}});
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
  try {
    apply_json(d, Json{{"frame_count", "many"}});
    FAIL("bad type accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
  CHECK_THROWS_AS(parse_json("{\"a\": ", "test"), Error);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("no-such-command") == 1);
  CHECK(run("make-scene") == 1);
  CHECK(run("protocol --out " + (dir / "p.json").string()) == 0);
  CHECK(read_json(dir / "p.json").at("placements").size() == 108);
  CHECK(run("protocol --azimuth-count 0") == 2);
  CHECK(run("eval --manifest " + (dir / "missing.json").string()) == 2);
  CHECK(run("make-scene --out " + (dir / "s").string() + " --frames 3 --image-size 48 --focal 120") == 0);
  CHECK(fs::exists(dir / "s" / "scene.json"));
  CHECK(run("annotate --scene " + (dir / "s" / "scene.json").string() + " --max-iterations 2 --out " +
            (dir / "r.json").string()) == 0);
  CHECK(read_json(dir / "r.json").contains("consensus_pose"));
  CHECK(run("losses-check --seed 3 --out " + (dir / "l.json").string()) == 0);
  // Supervised terms vanish for the exact prediction; the regularizer still
  // sees the target's own offsets.
  const Json exact = read_json(dir / "l.json").at("exact");
  for (const char* k : {"rot", "t", "def", "v3d", "p2d"}) CHECK(exact.at(k).get<double>() < 1e-12);
  CHECK(exact.at("reg").get<double>() > 0.0);
}
