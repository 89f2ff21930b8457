#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "defpose/geometry.hpp"
#include "defpose/mesh.hpp"
#include "defpose/silhouette.hpp"

namespace defpose {

/// One calibrated view of the object.
struct FrameObservation {
  Pose extrinsic;  ///< camera in world, T^W_C
  CameraIntrinsics intrinsics;
  Mask observed_mask;
  DistanceField gt_distance_field;
  std::optional<Image> observed_rgb;

  /// Builds a frame and precomputes the distance field of `mask`. Throws
  /// DimensionMismatch when the mask does not match the intrinsics.
  static FrameObservation make(const Pose& extrinsic, const CameraIntrinsics& intrinsics, Mask mask);
};

/// World-frame object poses, one per frame.
struct HypothesisSet {
  std::vector<Pose> world_poses;

  std::size_t size() const { return world_poses.size(); }
};

struct OptimizerConfig {
  double lambda = 1.0;  ///< consistency weight
  double w_vgg = 0.0;
  double w_dice = 1.0;
  double w_dt = 0.1;
  double w_r = 1.0;    ///< rad⁻²
  double w_t = 1.0e4;  ///< m⁻²
  int max_iterations = 200;
  double step_rotation = 0.02;     ///< initial rotation step, radians
  double step_translation = 0.004;  ///< initial translation step, meters
  int backtracking_tries = 5;
  /// A frame has converged when its accepted decrease in an iteration is at
  /// most `tolerance` times its share of the objective.
  double tolerance = 1e-6;
  double fd_eps_rotation = 1e-3;     ///< radians
  double fd_eps_translation = 1e-4;  ///< meters
  /// Worker threads for the gradient phase; 0 picks the hardware count.
  unsigned threads = 0;
  /// Optional perceptual extractor; L_vgg is 0 when null.
  const PerceptualExtractor* extractor = nullptr;

  void validate() const;
};

/// Eq. 9 thresholds.
struct InlierConfig {
  double translation_threshold = 0.005;                    ///< meters
  double rotation_threshold = std::numbers::pi / 180.0;  ///< radians

  void validate() const;
};

/// T^W_O,i = T^W_C_i · T^C_i_O for every frame. Throws LengthMismatch.
HypothesisSet lift_to_world(const std::vector<Pose>& camera_poses, const std::vector<FrameObservation>& frames);

/// Mean over unique pairs of w_r·e_R² + w_t·e_t². Throws TooFewFrames for
/// fewer than two hypotheses.
double consistency_loss(const HypothesisSet& h, double w_r, double w_t);

/// Gradient of consistency_loss with respect to the local perturbation of
/// hypothesis `index`: (ω, v) acting as R ← exp(ω)·R, t ← t + v.
Vec6 consistency_gradient(const HypothesisSet& h, std::size_t index, double w_r, double w_t);

/// Weighted alignment terms for a single frame.
struct AlignmentTerms {
  double vgg = 0.0;
  double dice = 0.0;
  double dt = 0.0;
  double total = 0.0;
};

/// Renders `mesh` at (T^W_C)⁻¹·world_pose and evaluates
/// w_vgg·L_vgg + w_dice·L_dice + w_dt·L_dt. With an extractor configured and
/// an observed RGB image present, the rendered image is the soft silhouette
/// replicated across channels. Throws FullyBehindCamera.
AlignmentTerms alignment_terms(const FrameObservation& frame, const Pose& world_pose, const TriMesh& mesh,
                               const OptimizerConfig& cfg);
double alignment_loss(const FrameObservation& frame, const Pose& world_pose, const TriMesh& mesh,
                      const OptimizerConfig& cfg);

/// Applies a local perturbation (ω, v): R ← exp(ω)·R, t ← t + v.
Pose perturb(const Pose& pose, const Vec6& delta);

struct IterationRecord {
  int iteration = 0;
  double total = 0.0;
  double alignment = 0.0;
  double consistency = 0.0;
  int accepted_steps = 0;
};

struct OptimizeResult {
  HypothesisSet poses;
  std::vector<IterationRecord> log;  ///< entry 0 is the initial state
  std::vector<bool> frozen;          ///< frames whose render failed
  int iterations = 0;
};

/// Refines world-frame hypotheses by minimizing Σ_i L_align⁽ⁱ⁾ + λ·L_consist.
///
/// Each iteration first computes, for every active frame and from one
/// snapshot of all poses, the gradient of the objective in that frame's
/// 6-dim local perturbation: central finite differences for the alignment
/// term and consistency_gradient for the consistency term. These
/// evaluations run in parallel. Then, in frame order, the rotation block and
/// the translation block each take a normalized descent step with
/// backtracking (halving, `backtracking_tries` attempts); a step is kept
/// only if the total objective decreases. Each block's step starts at the
/// configured size, doubles after an accepted step (capped at that size) and
/// restarts from its last value after a rejected one.
/// Frames whose render fails are frozen at their current pose.
OptimizeResult optimize(const HypothesisSet& initial, const std::vector<FrameObservation>& frames,
                        const TriMesh& mesh, const OptimizerConfig& cfg);

/// Total objective of `h` under `cfg`, skipping frames flagged in `frozen`.
double total_objective(const HypothesisSet& h, const std::vector<FrameObservation>& frames, const TriMesh& mesh,
                       const OptimizerConfig& cfg, const std::vector<bool>* frozen = nullptr);

struct InlierSelection {
  Pose consensus;
  std::size_t winner = 0;
  std::vector<std::size_t> inliers;  ///< ascending
};

/// For every j, I_j = {i : e_t(T_i, T_j) ≤ τ_t ∧ e_R(T_i, T_j) ≤ τ_R}. Returns
/// the hypothesis with the largest |I_j| (lowest index on ties) and its
/// inlier set. Throws EmptyInput for an empty set.
InlierSelection select_inliers(const HypothesisSet& h, const InlierConfig& cfg);

/// Mean translation and chordal-mean rotation (SVD projection of the mean
/// rotation matrix) over the given hypotheses.
Pose mean_pose(const HypothesisSet& h, const std::vector<std::size_t>& indices);

}  // namespace defpose
