// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace placekit {
namespace {

constexpr std::uint64_t kConditionSalt = 0x636F6E64ULL;  // distinct from chain indices

/// Columns of dR/dyaw applied to an object-frame point (z component is 0).
Vec3 yaw_jacobian(const Vec3& o, double cos_yaw, double sin_yaw) {
  return Vec3(-sin_yaw * o.x() - cos_yaw * o.y(), cos_yaw * o.x() - sin_yaw * o.y(), 0.0);
}

double clamp_abs(double v, double limit) { return std::clamp(v, -limit, limit); }

}  // namespace

double NoiseSchedule::alpha_bar(int k) const {
  if (k < 0 || k > steps()) fail("invalid_argument", "alpha_bar: step out of range");
  return k == 0 ? 1.0 : alpha_bars[static_cast<std::size_t>(k) - 1];
}

double NoiseSchedule::posterior_coeff_clean(int k) const {
  if (k < 1 || k > steps()) fail("invalid_argument", "posterior_coeff_clean: step out of range");
  return std::sqrt(alpha_bar(k - 1)) * betas[static_cast<std::size_t>(k) - 1] /
         (1.0 - alpha_bar(k));
}

double NoiseSchedule::posterior_coeff_noisy(int k) const {
  if (k < 1 || k > steps()) fail("invalid_argument", "posterior_coeff_noisy: step out of range");
  return std::sqrt(alphas[static_cast<std::size_t>(k) - 1]) * (1.0 - alpha_bar(k - 1)) /
         (1.0 - alpha_bar(k));
}

double NoiseSchedule::posterior_variance(int k) const {
  if (k < 1 || k > steps()) fail("invalid_argument", "posterior_variance: step out of range");
  return (1.0 - alpha_bar(k - 1)) / (1.0 - alpha_bar(k)) * betas[static_cast<std::size_t>(k) - 1];
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) fail("invalid_schedule", "linear schedule needs at least one step");
  NoiseSchedule s;
  s.betas.resize(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * f;
  }
  s.alphas.resize(s.betas.size());
  s.alpha_bars.resize(s.betas.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < s.betas.size(); ++i) {
    s.alphas[i] = 1.0 - s.betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (betas.empty()) fail("invalid_schedule", "schedule must have at least one step");
  if (alphas.size() != betas.size() || alpha_bars.size() != betas.size())
    fail("invalid_schedule", "schedule arrays must have equal length");
  if (!(translation_scale > 0.0) || !(yaw_scale > 0.0))
    fail("invalid_schedule", "schedule scales must be positive");
  double prod = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0))
      fail("invalid_schedule", "every beta must lie in (0, 1)");
    if (std::abs(alphas[i] - (1.0 - betas[i])) > 1e-12)
      fail("invalid_schedule", "alphas must equal 1 - beta");
    prod *= alphas[i];
    if (std::abs(alpha_bars[i] - prod) > 1e-12 * std::max(1.0, std::abs(prod)))
      fail("invalid_schedule", "alpha_bars must be the cumulative product of alphas");
  }
}

DenoiserCondition DenoiserCondition::make(const PointCloud& object_points,
                                          const AffordanceMap& coarse_map,
                                          const PointCloud& scene_cloud, int k_a,
                                          RandomStream& rng) {
  object_points.require_valid("denoiser condition object points");
  coarse_map.validate(scene_cloud.size());
  if (k_a < 1) fail("invalid_argument", "denoiser condition needs at least one sampled point");
  double total = 0.0;
  for (double a : coarse_map.activations) total += a;
  if (!(total > 0.0))
    fail("empty_affordance", "denoiser condition: coarse map has no positive activation");

  DenoiserCondition cond;
  cond.object_points = object_points;
  cond.coarse_map = coarse_map;
  cond.sampled_affordance_points.points.reserve(static_cast<std::size_t>(k_a));
  cond.sampled_affordance_points.activations.reserve(static_cast<std::size_t>(k_a));
  for (int i = 0; i < k_a; ++i) {
    const std::size_t j = rng.weighted_pick(coarse_map.activations);
    cond.sampled_affordance_points.points.push_back(scene_cloud.points[j]);
    cond.sampled_affordance_points.activations.push_back(coarse_map.activations[j]);
  }
  cond.validate();
  return cond;
}

Vec3 DenoiserCondition::target_translation() const {
  double total = 0.0;
  Vec3 mean(0.0, 0.0, 0.0);
  for (std::size_t i = 0; i < sampled_affordance_points.size(); ++i) {
    const double w = sampled_affordance_points.activations[i];
    mean += w * sampled_affordance_points.points[i];
    total += w;
  }
  if (!(total > 0.0))
    fail("empty_affordance", "denoiser condition: sampled points have no activation mass");
  return mean / total;
}

void DenoiserCondition::validate() const {
  object_points.require_valid("denoiser condition object points");
  sampled_affordance_points.require_valid("denoiser condition sampled points");
  if (sampled_affordance_points.activations.size() != sampled_affordance_points.points.size())
    fail("invalid_argument", "denoiser condition: sampled points must carry activations");
  if (coarse_map.activations.empty())
    fail("invalid_argument", "denoiser condition: coarse map must be non-empty");
}

Pose analytic_denoiser(const Pose& pose_k, int k, const NoiseSchedule& schedule,
                       const DenoiserCondition& cond) {
  if (k < 1 || k > schedule.steps()) fail("invalid_argument", "analytic_denoiser: step out of range");
  const double gamma = 1.0 - schedule.alpha_bar(k);
  const Vec3 target_chain = cond.target_translation() - cond.frame_center;
  const Vec3 t0 = gamma * target_chain + (1.0 - gamma) * pose_k.t;

  double yaw0 = pose_k.yaw;
  if (!cond.anchor_positions.empty()) {
    const Vec3 scene_t = t0 + cond.frame_center;
    const Vec3* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const Vec3& a : cond.anchor_positions) {
      const double d2 = (Vec2(scene_t.x(), scene_t.y()) - Vec2(a.x(), a.y())).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = &a;
      }
    }
    const Vec2 radial(scene_t.x() - best->x(), scene_t.y() - best->y());
    if (radial.norm() > 1e-9) {
      const auto [lo, hi] = cond.object_points.aabb();
      const double long_axis = (hi.x() - lo.x() >= hi.y() - lo.y()) ? 0.0 : M_PI / 2.0;
      const double tangent = std::atan2(radial.x(), -radial.y());
      // The footprint axis is undirected: pick the half-turn branch closest
      // to the current yaw, then blend with the same gamma as translation.
      const double cand_a = wrap_angle(tangent - long_axis);
      const double cand_b = wrap_angle(tangent - long_axis + M_PI);
      const double target_yaw =
          std::abs(wrap_angle(cand_a - pose_k.yaw)) <= std::abs(wrap_angle(cand_b - pose_k.yaw))
              ? cand_a
              : cand_b;
      yaw0 = pose_k.yaw + gamma * wrap_angle(target_yaw - pose_k.yaw);
    }
  }
  return Pose(t0, yaw0);
}

double spatial_feature(const Pose& pose, const AffordanceMap& map, const PointCloud& cloud) {
  map.validate(cloud.size());
  if (cloud.empty()) fail("empty_cloud", "spatial_feature: cloud must be non-empty");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const double w = 1.0 / ((cloud.points[j] - pose.t).norm() + 1e-6);
    num += w * map.activations[j];
    den += w;
  }
  return num / den;
}

CostResult cost_afford(const Pose& pose, const PointCloud& object_points,
                       const PointCloud& targets, const KdTree* target_tree) {
  object_points.require_valid("cost_afford object points");
  targets.require_valid("cost_afford targets");
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  CostResult out;
  for (const Vec3& o : object_points.points) {
    const Vec3 p(c * o.x() - s * o.y() + pose.t.x(), s * o.x() + c * o.y() + pose.t.y(),
                 o.z() + pose.t.z());
    Vec3 nearest;
    if (target_tree != nullptr) {
      nearest = target_tree->point(target_tree->nearest(p).index);
    } else {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < targets.size(); ++j) {
        const double d2 = (targets.points[j] - p).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_j = j;
        }
      }
      nearest = targets.points[best_j];
    }
    const Vec3 d = p - nearest;
    out.value += d.squaredNorm();
    out.d_t += 2.0 * d;
    out.d_yaw += 2.0 * d.dot(yaw_jacobian(o, c, s));
  }
  return out;
}

CostResult cost_collide(const Pose& pose, const PointCloud& object_points, const TsdfGrid& grid) {
  object_points.require_valid("cost_collide object points");
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  CostResult out;
  for (const Vec3& o : object_points.points) {
    const Vec3 p(c * o.x() - s * o.y() + pose.t.x(), s * o.x() + c * o.y() + pose.t.y(),
                 o.z() + pose.t.z());
    const TsdfSample smp = tsdf_query(grid, p);
    if (smp.value < 0.0) {
      out.value -= smp.value;
      out.d_t -= smp.gradient;
      out.d_yaw -= smp.gradient.dot(yaw_jacobian(o, c, s));
    }
  }
  return out;
}

void GuidanceConfig::validate() const {
  if (lambda_afford < 0.0 || lambda_collide < 0.0)
    fail("invalid_argument", "guidance weights must be non-negative");
  if (!(threshold_frac >= 0.0 && threshold_frac <= 1.0))
    fail("invalid_argument", "guidance threshold_frac must lie in [0, 1]");
  if (!(gradient_clamp > 0.0)) fail("invalid_argument", "gradient clamp must be positive");
}

Pose guided_reverse_step(const Pose& pose_k, int k, const DenoiserCondition& cond,
                         const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                         const GuidanceContext& ctx, RandomStream& rng,
                         StepDiagnostics* diagnostics) {
  if (k < 1 || k > schedule.steps())
    fail("invalid_argument", "guided_reverse_step: step out of range");
  StepDiagnostics local;
  StepDiagnostics& diag = diagnostics != nullptr ? *diagnostics : local;
  diag = StepDiagnostics{};

  if (ctx.scene_cloud != nullptr) {
    const Pose scene_pose_k(pose_k.t + cond.frame_center, pose_k.yaw);
    diag.spatial_activation = spatial_feature(scene_pose_k, cond.coarse_map, *ctx.scene_cloud);
  }

  const Pose predicted = analytic_denoiser(pose_k, k, schedule, cond);
  const Pose predicted_scene(predicted.t + cond.frame_center, predicted.yaw);

  // Accumulate the weighted cost gradient at the predicted clean pose
  // (scene frame), then convert to normalized chain units.
  Vec3 grad_t(0.0, 0.0, 0.0);
  double grad_yaw = 0.0;
  if (guidance.afford_enabled && ctx.targets != nullptr && !ctx.targets->empty()) {
    const CostResult ca =
        cost_afford(predicted_scene, cond.object_points, *ctx.targets, ctx.target_tree);
    diag.cost_afford = ca.value;
    grad_t += guidance.lambda_afford * ca.d_t;
    grad_yaw += guidance.lambda_afford * ca.d_yaw;
  }
  if (guidance.collide_enabled && ctx.grid != nullptr) {
    const CostResult cc = cost_collide(predicted_scene, cond.object_points, *ctx.grid);
    diag.cost_collide = cc.value;
    grad_t += guidance.lambda_collide * cc.d_t;
    grad_yaw += guidance.lambda_collide * cc.d_yaw;
  }

  const double s = schedule.translation_scale;
  const double s_yaw = schedule.yaw_scale;
  const double variance = schedule.posterior_variance(k);
  const double clamp_u = guidance.gradient_clamp / s;  // normalized units

  // Correction in normalized units: -variance * gradient wrt u, where
  // d/du = scale * d/dt. Non-finite components are sanitized and flagged.
  const auto sanitize = [&](double correction) {
    if (std::isnan(correction)) {
      diag.non_finite_gradient = true;
      return 0.0;
    }
    if (std::isinf(correction)) {
      diag.non_finite_gradient = true;
      return correction > 0.0 ? clamp_u : -clamp_u;
    }
    if (std::abs(correction) > clamp_u) {
      diag.clamped = true;
      return clamp_abs(correction, clamp_u);
    }
    return correction;
  };
  Vec3 delta_u;
  for (int i = 0; i < 3; ++i) delta_u[i] = sanitize(-variance * s * grad_t[i]);
  const double delta_yaw_u = sanitize(-variance * s_yaw * grad_yaw);

  const Vec3 corrected_t = predicted.t + s * delta_u;
  const double corrected_yaw = predicted.yaw + s_yaw * delta_yaw_u;

  const double coeff_clean = schedule.posterior_coeff_clean(k);
  const double coeff_noisy = schedule.posterior_coeff_noisy(k);
  Vec3 mean_t = coeff_clean * corrected_t + coeff_noisy * pose_k.t;
  double mean_yaw = coeff_clean * corrected_yaw + coeff_noisy * pose_k.yaw;
  if (k > 1) {
    const double sigma = std::sqrt(variance);
    mean_t += sigma * s * Vec3(rng.normal(), rng.normal(), rng.normal());
    mean_yaw += sigma * s_yaw * rng.normal();
  }
  return Pose(mean_t, mean_yaw);
}

Pose forward_noise(const Pose& pose0, int k, const NoiseSchedule& schedule, RandomStream& rng) {
  if (k < 1 || k > schedule.steps()) fail("invalid_argument", "forward_noise: step out of range");
  const double ab = schedule.alpha_bar(k);
  const double keep = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  const Vec3 t = keep * pose0.t + noise * schedule.translation_scale *
                                      Vec3(rng.normal(), rng.normal(), rng.normal());
  const double yaw = keep * pose0.yaw + noise * schedule.yaw_scale * rng.normal();
  return Pose(t, yaw);
}

void PlannerConfig::validate() const {
  schedule.validate();
  guidance.validate();
  if (sampled_target_count < 1)
    fail("invalid_argument", "planner needs at least one sampled target point");
  if (coarse_clusters < 1) fail("invalid_argument", "planner needs at least one coarse cluster");
  if (!(tsdf_voxel > 0.0) || tsdf_truncation < 2.0 * tsdf_voxel || tsdf_padding < tsdf_truncation)
    fail("invalid_argument", "planner grid parameters are inconsistent");
}

std::vector<PlacementCandidate> plan_placement(const Scene& scene,
                                               const std::vector<StructuredPlan>& plans,
                                               const PointCloud& object_points, int n_candidates,
                                               const PlannerConfig& config) {
  config.validate();
  if (plans.empty()) fail("invalid_argument", "plan_placement: plans must be non-empty");
  if (n_candidates < 1) fail("invalid_argument", "plan_placement: need at least one candidate");
  object_points.require_valid("plan_placement subject points");

  const auto [lo, hi] = object_points.aabb();
  const Vec3 subject_extent = hi - lo;
  const PointCloud cloud = scene.scene_cloud();

  std::vector<AffordanceMap> maps;
  maps.reserve(plans.size());
  for (const StructuredPlan& plan : plans)
    maps.push_back(plan_affordance(scene, plan, subject_extent));
  const AffordanceMap coarse =
      compose_coarse(maps, cloud, config.coarse_clusters, config.coarse_top_k);
  const AffordanceMap fine = compose_fine(maps);
  const PointCloud targets =
      high_affordance_points(fine, cloud, config.guidance.threshold_frac);
  const KdTree target_tree(targets.points);

  std::vector<PointCloud> obstacle_clouds;
  obstacle_clouds.reserve(scene.objects.size());
  for (const SceneObject& obj : scene.objects) obstacle_clouds.push_back(obj.world_points());
  TsdfGrid grid;
  const bool have_grid = !obstacle_clouds.empty();
  if (have_grid)
    grid = build_tsdf(obstacle_clouds, config.tsdf_voxel, config.tsdf_truncation,
                      config.tsdf_padding);

  RandomStream cond_rng(derive_seed(config.seed, kConditionSalt));
  DenoiserCondition cond = DenoiserCondition::make(object_points, coarse, cloud,
                                                   config.sampled_target_count, cond_rng);
  cond.anchor_positions.reserve(plans.size());
  for (const StructuredPlan& plan : plans) cond.anchor_positions.push_back(plan.anchor_position);
  cond.frame_center = cond.target_translation();

  bool infeasible = false;
  try {
    annotate_region(scene, plans, subject_extent);
  } catch (const Error& e) {
    if (e.kind() != "infeasible_plan_set") throw;
    infeasible = true;
  }

  GuidanceContext ctx;
  ctx.targets = &targets;
  ctx.target_tree = &target_tree;
  ctx.grid = have_grid ? &grid : nullptr;
  ctx.scene_cloud = &cloud;

  std::vector<PlacementCandidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n_candidates));
  for (int c = 0; c < n_candidates; ++c) {
    RandomStream rng(derive_seed(config.seed, static_cast<std::uint64_t>(c)));
    Pose pose(config.schedule.translation_scale * Vec3(rng.normal(), rng.normal(), rng.normal()),
              config.schedule.yaw_scale * rng.normal());
    bool non_finite = false;
    StepDiagnostics diag;
    for (int k = config.schedule.steps(); k >= 1; --k) {
      pose = guided_reverse_step(pose, k, cond, config.schedule, config.guidance, ctx, rng, &diag);
      non_finite = non_finite || diag.non_finite_gradient;
    }

    Vec3 landing = pose.t + cond.frame_center;
    landing.z() = support_height_at(scene, Vec2(landing.x(), landing.y()));
    const Pose snapped(landing, pose.yaw);

    PlacementCandidate cand;
    cand.pose = snapped;
    cand.cost_afford = cost_afford(snapped, object_points, targets, &target_tree).value;
    cand.cost_collide =
        have_grid ? cost_collide(snapped, object_points, grid).value : 0.0;
    cand.final_cost = (config.guidance.afford_enabled
                           ? config.guidance.lambda_afford * cand.cost_afford
                           : 0.0) +
                      (config.guidance.collide_enabled
                           ? config.guidance.lambda_collide * cand.cost_collide
                           : 0.0);
    cand.non_finite_gradient = non_finite;
    cand.infeasible_region = infeasible;
    candidates.push_back(cand);
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const PlacementCandidate& a, const PlacementCandidate& b) {
                     return a.final_cost < b.final_cost;
                   });
  for (const PlacementCandidate& cand : candidates) {
    if (cand.final_cost < candidates.front().final_cost)
      fail("internal_error", "plan_placement: ranking postcondition violated");
  }
  return candidates;
}

}  // namespace placekit
