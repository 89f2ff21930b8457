#include "defpose/consensus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <Eigen/SVD>

#include "defpose/error.hpp"

namespace defpose {

FrameObservation FrameObservation::make(const Pose& extrinsic, const CameraIntrinsics& intrinsics, Mask mask) {
  intrinsics.validate();
  if (!mask.same_shape(intrinsics.width, intrinsics.height)) {
    throw Error(ErrorKind::DimensionMismatch, "consensus.frame", "mask size does not match the intrinsics");
  }
  FrameObservation f;
  f.extrinsic = extrinsic;
  f.intrinsics = intrinsics;
  f.gt_distance_field = distance_transform(mask);
  f.observed_mask = std::move(mask);
  return f;
}

void OptimizerConfig::validate() const {
  const char* where = "consensus.config";
  for (double w : {lambda, w_vgg, w_dice, w_dt, w_r, w_t}) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, where, "weights must be non-negative");
  }
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, where, "max_iterations must be at least 1");
  if (!(step_rotation > 0.0) || !(step_translation > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, where, "step sizes must be positive");
  }
  if (!(fd_eps_rotation > 0.0) || !(fd_eps_translation > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, where, "finite-difference epsilons must be positive");
  }
  if (backtracking_tries < 1) throw Error(ErrorKind::InvalidArgument, where, "backtracking_tries must be at least 1");
  if (!(tolerance >= 0.0)) throw Error(ErrorKind::InvalidArgument, where, "tolerance must be non-negative");
}

void InlierConfig::validate() const {
  if (!(translation_threshold > 0.0) || !(rotation_threshold > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "consensus.inlier_config", "thresholds must be positive");
  }
}

HypothesisSet lift_to_world(const std::vector<Pose>& camera_poses, const std::vector<FrameObservation>& frames) {
  if (camera_poses.size() != frames.size()) {
    throw Error(ErrorKind::LengthMismatch, "consensus.lift_to_world",
                std::to_string(camera_poses.size()) + " poses for " + std::to_string(frames.size()) + " frames");
  }
  HypothesisSet h;
  h.world_poses.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) h.world_poses.push_back(compose(frames[i].extrinsic, camera_poses[i]));
  return h;
}

double consistency_loss(const HypothesisSet& h, double w_r, double w_t) {
  const std::size_t n = h.size();
  if (n < 2) throw Error(ErrorKind::TooFewFrames, "consensus.consistency_loss", "need at least two hypotheses");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double er = geodesic_distance(h.world_poses[i].rotation, h.world_poses[j].rotation);
      const double et = translation_distance(h.world_poses[i], h.world_poses[j]);
      sum += w_r * er * er + w_t * et * et;
    }
  }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

Vec6 consistency_gradient(const HypothesisSet& h, std::size_t index, double w_r, double w_t) {
  const std::size_t n = h.size();
  if (n < 2) throw Error(ErrorKind::TooFewFrames, "consensus.consistency_gradient", "need at least two hypotheses");
  const Pose& pi = h.world_poses[index];
  Vec6 g = Vec6::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    if (j == index) continue;
    const Pose& pj = h.world_poses[j];
    // d/dω θ(exp(ω)·Ri·Rjᵀ)² = 2·log(Ri·Rjᵀ).
    g.head<3>() += 2.0 * w_r * (pi.rotation * pj.rotation.inverse()).log();
    g.tail<3>() += 2.0 * w_t * (pi.translation - pj.translation);
  }
  return g / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

Pose perturb(const Pose& pose, const Vec6& delta) {
  Pose out;
  out.rotation = Rotation::exp(delta.head<3>()) * pose.rotation;
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

AlignmentTerms alignment_terms(const FrameObservation& frame, const Pose& world_pose, const TriMesh& mesh,
                               const OptimizerConfig& cfg) {
  AlignmentTerms out;
  if (cfg.w_dice == 0.0 && cfg.w_dt == 0.0 && (cfg.w_vgg == 0.0 || !cfg.extractor)) return out;
  const Pose object_in_camera = compose(frame.extrinsic.inverse(), world_pose);
  const Mask rendered = rasterize_silhouette(mesh, object_in_camera, frame.intrinsics);
  if (cfg.w_dice != 0.0) out.dice = dice_loss(rendered, frame.observed_mask);
  if (cfg.w_dt != 0.0) out.dt = dt_loss(rendered, frame.gt_distance_field);
  if (cfg.w_vgg != 0.0 && cfg.extractor && frame.observed_rgb) {
    const Image& observed = *frame.observed_rgb;
    Image rendered_rgb(rendered.width, rendered.height, observed.channels);
    for (int y = 0; y < rendered.height; ++y)
      for (int x = 0; x < rendered.width; ++x)
        for (int c = 0; c < observed.channels; ++c) rendered_rgb.at(x, y, c) = rendered.at(x, y);
    out.vgg = perceptual_loss(cfg.extractor, rendered_rgb, observed, frame.observed_mask);
  }
  out.total = cfg.w_vgg * out.vgg + cfg.w_dice * out.dice + cfg.w_dt * out.dt;
  return out;
}

double alignment_loss(const FrameObservation& frame, const Pose& world_pose, const TriMesh& mesh,
                      const OptimizerConfig& cfg) {
  return alignment_terms(frame, world_pose, mesh, cfg).total;
}

double total_objective(const HypothesisSet& h, const std::vector<FrameObservation>& frames, const TriMesh& mesh,
                       const OptimizerConfig& cfg, const std::vector<bool>* frozen) {
  double total = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frozen && (*frozen)[i]) continue;
    total += alignment_loss(frames[i], h.world_poses[i], mesh, cfg);
  }
  if (cfg.lambda != 0.0) total += cfg.lambda * consistency_loss(h, cfg.w_r, cfg.w_t);
  return total;
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// captured per index and rethrown by the caller.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
}

bool is_render_failure(const Error& e) { return e.kind() == ErrorKind::FullyBehindCamera; }

struct FrameState {
  double alignment = 0.0;
  // Per-block step as a fraction of the configured maximum (rotation, translation).
  double step[2] = {1.0, 1.0};
  bool frozen = false;
  bool converged = false;
};

}  // namespace

OptimizeResult optimize(const HypothesisSet& initial, const std::vector<FrameObservation>& frames,
                        const TriMesh& mesh, const OptimizerConfig& cfg) {
  cfg.validate();
  const std::size_t n = frames.size();
  if (n < 2) throw Error(ErrorKind::TooFewFrames, "consensus.optimize", "need at least two frames");
  if (initial.size() != n) {
    throw Error(ErrorKind::LengthMismatch, "consensus.optimize", "hypothesis count differs from frame count");
  }

  HypothesisSet poses = initial;
  std::vector<FrameState> state(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      state[i].alignment = alignment_loss(frames[i], poses.world_poses[i], mesh, cfg);
    } catch (const Error& e) {
      if (!is_render_failure(e)) throw;
      state[i].frozen = true;
    }
  }
  const bool coupled = cfg.lambda != 0.0;
  const auto consistency = [&](const HypothesisSet& h) {
    return coupled ? consistency_loss(h, cfg.w_r, cfg.w_t) : 0.0;
  };
  double consist = consistency(poses);
  const auto alignment_sum = [&] {
    double s = 0.0;
    for (const auto& st : state) s += st.alignment;
    return s;
  };

  // Logged objective with frame i's alignment replaced by `align_i`.
  const auto objective = [&](std::size_t i, double align_i, double consist_value) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += j == i ? align_i : state[j].alignment;
    return s + cfg.lambda * consist_value;
  };

  OptimizeResult result;
  result.log.push_back({0, alignment_sum() + cfg.lambda * consist, alignment_sum(), consist, 0});

  std::vector<Vec6> gradients(n, Vec6::Zero());
  std::vector<char> render_failed(n, 0);
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      if (!state[i].frozen && !state[i].converged) active.push_back(i);
    }
    if (active.empty()) break;

    // Gradient phase on an immutable snapshot.
    const HypothesisSet snapshot = poses;
    std::vector<std::exception_ptr> errors(active.size());
    parallel_for(active.size(), cfg.threads, [&](std::size_t a) {
      const std::size_t i = active[a];
      try {
        Vec6 g = Vec6::Zero();
        for (int k = 0; k < 6; ++k) {
          const double eps = k < 3 ? cfg.fd_eps_rotation : cfg.fd_eps_translation;
          Vec6 d = Vec6::Zero();
          d[k] = eps;
          const double plus = alignment_loss(frames[i], perturb(snapshot.world_poses[i], d), mesh, cfg);
          const double minus = alignment_loss(frames[i], perturb(snapshot.world_poses[i], -d), mesh, cfg);
          g[k] = (plus - minus) / (2.0 * eps);
        }
        if (coupled) g += cfg.lambda * consistency_gradient(snapshot, i, cfg.w_r, cfg.w_t);
        gradients[i] = g;
        render_failed[i] = 0;
      } catch (const Error& e) {
        if (!is_render_failure(e)) errors[a] = std::current_exception();
        render_failed[i] = 1;
      } catch (...) {
        errors[a] = std::current_exception();
      }
    });
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    // Update phase in frame order.
    int accepted = 0;
    std::vector<bool> moved(n, false);
    for (std::size_t i : active) {
      FrameState& st = state[i];
      if (render_failed[i]) {
        st.frozen = true;
        continue;
      }
      const double share_before = st.alignment + cfg.lambda * consist;
      double decrease = 0.0;
      for (int block = 0; block < 2; ++block) {
        const Vec3 g = gradients[i].segment<3>(3 * block);
        const double norm = g.norm();
        if (!(norm > 0.0)) continue;
        const double max_step = block == 0 ? cfg.step_rotation : cfg.step_translation;
        const Vec3 dir = -max_step * g / norm;
        double alpha = st.step[block];
        for (int attempt = 0; attempt < cfg.backtracking_tries; ++attempt, alpha *= 0.5) {
          Vec6 d = Vec6::Zero();
          d.segment<3>(3 * block) = alpha * dir;
          HypothesisSet trial = poses;
          trial.world_poses[i] = perturb(poses.world_poses[i], d);
          double align = 0.0;
          try {
            align = alignment_loss(frames[i], trial.world_poses[i], mesh, cfg);
          } catch (const Error& e) {
            if (!is_render_failure(e)) throw;
            continue;
          }
          // Compare exactly what the log records so accepted iterations are
          // monotone without rounding slack. Uncoupled frames compare their
          // own term only; the fixed-order sum is monotone in each term.
          const double trial_consist = consistency(trial);
          const double before = coupled ? objective(i, st.alignment, consist) : st.alignment;
          const double after = coupled ? objective(i, align, trial_consist) : align;
          if (after < before) {
            poses = std::move(trial);
            st.alignment = align;
            consist = trial_consist;
            decrease += before - after;
            st.step[block] = std::min(2.0 * alpha, 1.0);
            ++accepted;
            moved[i] = true;
            break;
          }
        }
      }
      st.converged = decrease <= cfg.tolerance * std::abs(share_before);
    }

    // A coupled frame's objective changes whenever any other frame moves.
    if (coupled && accepted > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (state[i].frozen || !state[i].converged) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && moved[j]) {
            state[i].converged = false;
            break;
          }
        }
      }
    }

    const double align_total = alignment_sum();
    result.log.push_back({iter, align_total + cfg.lambda * consist, align_total, consist, accepted});
    result.iterations = iter;
  }

  result.poses = std::move(poses);
  result.frozen.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.frozen[i] = state[i].frozen;
  return result;
}

InlierSelection select_inliers(const HypothesisSet& h, const InlierConfig& cfg) {
  cfg.validate();
  if (h.size() == 0) throw Error(ErrorKind::EmptyInput, "consensus.select_inliers", "no hypotheses");
  InlierSelection best;
  for (std::size_t j = 0; j < h.size(); ++j) {
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double et = translation_distance(h.world_poses[i], h.world_poses[j]);
      const double er = geodesic_distance(h.world_poses[i].rotation, h.world_poses[j].rotation);
      if (et <= cfg.translation_threshold && er <= cfg.rotation_threshold) support.push_back(i);
    }
    if (j == 0 || support.size() > best.inliers.size()) {
      best.winner = j;
      best.inliers = std::move(support);
    }
  }
  best.consensus = h.world_poses[best.winner];
  return best;
}

Pose mean_pose(const HypothesisSet& h, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error(ErrorKind::EmptyInput, "consensus.mean_pose", "no hypotheses selected");
  Mat3 sum_r = Mat3::Zero();
  Vec3 sum_t = Vec3::Zero();
  for (std::size_t i : indices) {
    sum_r += h.world_poses.at(i).rotation.matrix();
    sum_t += h.world_poses.at(i).translation;
  }
  Eigen::JacobiSVD<Mat3> svd(sum_r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  Pose out;
  out.rotation = Rotation::from_matrix(svd.matrixU() * d * svd.matrixV().transpose(), 1e-9);
  out.translation = sum_t / static_cast<double>(indices.size());
  return out;
}

}  // namespace defpose
