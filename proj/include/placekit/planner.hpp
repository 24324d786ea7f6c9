// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "placekit/affordance.hpp"
#include "placekit/common.hpp"
#include "placekit/geometry.hpp"
#include "placekit/scene_model.hpp"

namespace placekit {

/// Variance schedule for the placement diffusion chain, plus the fixed units
/// of the chain's state space. Steps are indexed k = 1..K; index 0 of the
/// stored arrays corresponds to k = 1. All schedule quantities (beta,
/// alpha_bar, posterior coefficients) are expressed in normalized
/// coordinates u = (t - c) / translation_scale (yaw analogously divided by
/// yaw_scale); samples in meters/radians are obtained by scaling back.
///
/// Invariants: K >= 1; every beta in (0, 1); scales > 0; alpha_bar strictly
/// decreasing; posterior_variance(1) == 0, so the last reverse step is
/// deterministic given the predicted clean pose.
struct NoiseSchedule {
  std::vector<double> betas;        ///< betas[k-1] = beta_k
  std::vector<double> alphas;       ///< 1 - beta_k
  std::vector<double> alpha_bars;   ///< prod_{j<=k} alpha_j
  double translation_scale = 0.10;  ///< meters per normalized unit
  double yaw_scale = M_PI / 2.0;    ///< radians per normalized unit

  int steps() const { return static_cast<int>(betas.size()); }
  double alpha_bar(int k) const;  ///< k in 0..K; alpha_bar(0) == 1
  /// Coefficient of the predicted clean pose in the reverse posterior mean.
  double posterior_coeff_clean(int k) const;
  /// Coefficient of the current noisy pose in the reverse posterior mean.
  double posterior_coeff_noisy(int k) const;
  /// Reverse posterior variance (normalized units); zero at k = 1.
  double posterior_variance(int k) const;

  /// Linear beta ramp. The defaults drive alpha_bar(K) to ~3e-7 so the
  /// terminal marginal is indistinguishable from the unit prior, while the
  /// tiny starting beta keeps the last reverse steps nearly noiseless so
  /// cost corrections applied late are not washed out again.
  static NoiseSchedule linear(int steps = 100, double beta_start = 1e-4, double beta_end = 0.27);
  void validate() const;
};

/// Everything the pose denoiser is allowed to see: the subject's point cloud
/// (object frame, base at z = 0), the coarse composed affordance map, and
/// k_a scene points sampled with probability proportional to that map's
/// activation. `frame_center` is the scene-frame position of the diffusion
/// chain's origin: chains operate on poses relative to this point, and the
/// planner centers it on the activation-weighted mean of the sampled points
/// so the unguided terminal distribution is centered on the target.
struct DenoiserCondition {
  PointCloud object_points;
  AffordanceMap coarse_map;
  PointCloud sampled_affordance_points;  ///< scene frame, with activations
  std::vector<Vec3> anchor_positions;    ///< plan anchors, for yaw targets
  Vec3 frame_center{0.0, 0.0, 0.0};

  /// Draws `k_a` cloud points (with replacement) weighted by the coarse
  /// map's activations and records them with their activations.
  /// pre: coarse map has positive total activation; k_a >= 1.
  static DenoiserCondition make(const PointCloud& object_points, const AffordanceMap& coarse_map,
                                const PointCloud& scene_cloud, int k_a, RandomStream& rng);

  /// Activation-weighted mean of the sampled affordance points (scene frame).
  Vec3 target_translation() const;
  void validate() const;
};

/// Analytic stand-in for a learned pose denoiser. Predicts the clean pose
/// from the noisy pose at step k as a convex blend toward the conditioning
/// target: T0 = gamma_k * target + (1 - gamma_k) * Tk with gamma_k =
/// 1 - alpha_bar(k), so early (high-noise) steps trust the target and late
/// steps trust the sample. The yaw target aligns the subject's long
/// footprint axis with the tangent of the circle around the nearest plan
/// anchor; without anchors the yaw is left untouched. Both pose arguments
/// are in chain coordinates (relative to cond.frame_center).
Pose analytic_denoiser(const Pose& pose_k, int k, const NoiseSchedule& schedule,
                       const DenoiserCondition& cond);

/// Inverse-distance-weighted interpolation of a map's activation at the
/// pose's translation: sum_j w_j a_j / sum_j w_j with w_j = 1 / (dist + 1e-6).
/// pre: map matches `cloud` and is non-empty.
double spatial_feature(const Pose& pose, const AffordanceMap& map, const PointCloud& cloud);

/// Scalar cost with its exact gradient through the pose (translation and yaw).
struct CostResult {
  double value = 0.0;
  Vec3 d_t{0.0, 0.0, 0.0};
  double d_yaw = 0.0;
};

/// Sum of squared distances from the posed subject points to their nearest
/// high-affordance targets. The gradient holds the correspondences fixed,
/// which is exact almost everywhere (the nearest-target assignment is
/// piecewise constant). pre: both clouds non-empty. `target_tree`, when
/// given, must index exactly `targets.points`.
CostResult cost_afford(const Pose& pose, const PointCloud& object_points,
                       const PointCloud& targets, const KdTree* target_tree = nullptr);

/// Penetration cost: sum over posed subject points of -min(tsdf(p), 0), with
/// the exact gradient of the trilinear interpolant. Points in free space
/// contribute nothing. pre: object_points non-empty; the grid should be
/// built from the obstacle objects only (not the supporting surface).
CostResult cost_collide(const Pose& pose, const PointCloud& object_points, const TsdfGrid& grid);

/// Weights and switches for reconstruction guidance.
/// Invariants: lambdas >= 0; 0 <= threshold_frac <= 1; gradient_clamp > 0.
struct GuidanceConfig {
  double lambda_afford = 500.0;
  double lambda_collide = 1000.0;
  bool afford_enabled = true;
  bool collide_enabled = true;
  /// Fraction of the max fine-map activation a point must reach to count as
  /// a guidance target. The default keeps the target ball tight enough
  /// (radius ~0.93 sigma) that anchor-rim and neighbor points stay out of
  /// the target set, which would otherwise drag placements against the
  /// anchor.
  double threshold_frac = 0.65;
  /// Per-step translation correction limit in meters; the yaw limit is the
  /// same value expressed in normalized units times the yaw scale.
  double gradient_clamp = 0.05;
  void validate() const;
};

/// Scene-side inputs the guided reverse step evaluates costs against.
/// `targets` are the high-affordance points (scene frame); `grid` may be
/// null when the scene has no obstacle objects (collision term skipped);
/// `scene_cloud` backs the condition's coarse map and is only needed for
/// the spatial-activation diagnostic (skipped when null).
struct GuidanceContext {
  const PointCloud* targets = nullptr;
  const KdTree* target_tree = nullptr;
  const TsdfGrid* grid = nullptr;
  const PointCloud* scene_cloud = nullptr;
};

/// Per-step diagnostics reported by guided_reverse_step.
struct StepDiagnostics {
  double spatial_activation = 0.0;  ///< coarse-map activation at the sample
  double cost_afford = 0.0;         ///< unweighted, at the predicted clean pose
  double cost_collide = 0.0;        ///< unweighted, at the predicted clean pose
  bool non_finite_gradient = false;
  bool clamped = false;
};

/// One reverse diffusion step k -> k-1 with reconstruction guidance:
/// predict the clean pose, correct it by the posterior-variance-scaled cost
/// gradient (computed at the predicted pose, clamped per component), then
/// sample the reverse posterior. Poses are in chain coordinates; costs are
/// evaluated at the equivalent scene pose. Non-finite gradient components
/// are replaced (NaN -> 0, +-inf -> clamp) and flagged. At k = 1 the step
/// is deterministic. pre: 1 <= k <= schedule.steps().
Pose guided_reverse_step(const Pose& pose_k, int k, const DenoiserCondition& cond,
                         const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                         const GuidanceContext& ctx, RandomStream& rng,
                         StepDiagnostics* diagnostics = nullptr);

/// Closed-form forward marginal: x_k = sqrt(alpha_bar_k) x_0 +
/// sqrt(1 - alpha_bar_k) * scale * eps, eps ~ N(0, I), applied to the
/// translation (scale = translation_scale) and the wrapped yaw (yaw_scale).
/// pre: 1 <= k <= schedule.steps().
Pose forward_noise(const Pose& pose0, int k, const NoiseSchedule& schedule, RandomStream& rng);

/// Knobs for plan_placement.
struct PlannerConfig {
  NoiseSchedule schedule = NoiseSchedule::linear();
  GuidanceConfig guidance;
  int sampled_target_count = 64;  ///< k_a points conditioning the denoiser
  int coarse_clusters = 2;        ///< k for the coarse composition
  int coarse_top_k = 0;           ///< kept clusters; <= 0 keeps all
  double tsdf_voxel = 0.01;
  double tsdf_truncation = 0.05;
  double tsdf_padding = 0.10;
  std::uint64_t seed = 0;
  void validate() const;
};

/// One candidate placement with its ranking cost and diagnostics.
struct PlacementCandidate {
  Pose pose;                 ///< scene frame, base snapped to the support
  double final_cost = 0.0;   ///< lambda-weighted sum used for ranking
  double cost_afford = 0.0;  ///< unweighted terms at the final pose
  double cost_collide = 0.0;
  bool non_finite_gradient = false;  ///< any step flagged
  bool infeasible_region = false;    ///< plan constraints have empty region
};

/// Full placement pipeline: per-plan affordance fields, coarse and fine
/// compositions, high-affordance targets, an obstacle TSDF, then
/// `n_candidates` independent guided reverse chains (candidate c is seeded
/// by derive_seed(config.seed, c)). Each chain's final pose has its base
/// snapped to the support height at its landing point before the final
/// costs are evaluated. Candidates are returned sorted by final cost
/// ascending (ties keep chain order). An empty constraint region is a
/// warning recorded on every candidate, not an error.
/// pre: plans non-empty; object_points non-empty; n_candidates >= 1.
std::vector<PlacementCandidate> plan_placement(const Scene& scene,
                                               const std::vector<StructuredPlan>& plans,
                                               const PointCloud& object_points, int n_candidates,
                                               const PlannerConfig& config);

}  // namespace placekit
