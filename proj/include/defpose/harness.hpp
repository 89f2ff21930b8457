#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "defpose/consensus.hpp"
#include "defpose/lattice.hpp"
#include "defpose/metrics.hpp"
#include "defpose/protocol.hpp"
#include "defpose/serialization.hpp"

namespace defpose {

/// Perturbation of the initial hypotheses.
///
/// Inliers get T = exp(ω)·R_gt, t_gt + v with every component of ω drawn
/// from N(0, σ_R²) and of v from N(0, σ_t²). Outliers are
/// round(fraction·N) frames chosen without replacement; each is rotated
/// about a random axis by an angle uniform in [outlier_min_rotation, π] and
/// shifted along a random direction by a distance uniform in
/// [outlier_min_translation, outlier_max_translation].
struct NoiseSpec {
  double sigma_t = 0.0;  ///< meters
  double sigma_r = 0.0;  ///< radians
  double outlier_fraction = 0.0;
  double outlier_min_rotation = 2.6179938779914944;  ///< 150°
  double outlier_min_translation = 0.05;
  double outlier_max_translation = 0.10;

  void validate() const;
  std::size_t outlier_count(std::size_t frames) const;
};

struct SceneConfig {
  std::size_t frame_count = 12;
  int image_size = 256;
  double focal = 450.0;  ///< pixels
  ProtocolSpec protocol;
  double deformation_fraction = 0.04;
  LatticeBlend blend = LatticeBlend::Quintic;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Overrides the fields named in `j` (frame_count, image_size, focal,
/// deformation_fraction, blend, seed, protocol, and the noise fields
/// sigma_t, sigma_r, outlier_fraction, outlier_min_rotation,
/// outlier_min_translation, outlier_max_translation). Unknown keys throw
/// InvalidArgument.
void apply_json(SceneConfig& cfg, const Json& j);
Json scene_config_to_json(const SceneConfig& cfg);

/// Forward-constructed annotation problem with known ground truth.
struct SyntheticScene {
  TriMesh base_mesh;
  TriMesh mesh;  ///< canonicalized deformed instance, used for rendering
  DeformationRecord deformation;
  Pose gt_world_pose;
  std::vector<FrameObservation> frames;  ///< masks rendered at ground truth
  std::vector<Pose> initial_camera_poses;
  std::vector<std::size_t> outliers;  ///< ascending
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

/// Frames use an even stride through the protocol placements
/// (placement ⌊i·P/N⌋ for frame i). All randomness flows from `cfg.seed`
/// through the "deformation", "scene" and "noise" sub-streams.
SyntheticScene build_scene(const TriMesh& base_mesh, const SceneConfig& cfg);

/// Writes scene.json, mesh.obj and masks/frame_NNN.pgm under `dir`.
void save_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

/// Frames, mesh and initial hypotheses read back from a scene file.
struct LoadedScene {
  TriMesh mesh;
  std::vector<FrameObservation> frames;
  std::vector<Pose> initial_camera_poses;
  std::optional<Pose> gt_world_pose;
  std::vector<std::size_t> outliers;
};

LoadedScene load_scene(const std::filesystem::path& scene_json);

struct AnnotationResult {
  OptimizeResult optimization;
  HypothesisSet initial;
  InlierSelection selection;
  Pose consensus;  ///< winning hypothesis, or the inlier mean when requested
  std::optional<double> translation_error;  ///< against ground truth, meters
  std::optional<double> rotation_error;     ///< radians
};

AnnotationResult annotate(const LoadedScene& scene, const OptimizerConfig& opt, const InlierConfig& inl,
                          bool average_inliers = false);

Json annotation_to_json(const AnnotationResult& r, const OptimizerConfig& opt, const InlierConfig& inl);
/// iteration,total,alignment,consistency,accepted_steps
std::string format_loss_log(const OptimizeResult& r);

/// Evaluation manifest: {"sample_count", "seed", "instances": [{"category",
/// "instance", "pred_mesh", "pred_pose", "gt_mesh", "gt_pose"}]}. Mesh paths
/// are relative to the manifest's directory.
MetricsReport run_eval(const std::filesystem::path& manifest);

}  // namespace defpose
