// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "placekit/planner.hpp"
#include "placekit/scene_factory.hpp"

using namespace placekit;

namespace {

/// Condition with a single fully-active target point: the denoiser target is
/// exactly `target` and sampling-related randomness drops out.
DenoiserCondition point_condition(const Vec3& target, const PointCloud& object_points) {
  DenoiserCondition cond;
  cond.object_points = object_points;
  cond.coarse_map.activations = {1.0};
  cond.sampled_affordance_points.points = {target};
  cond.sampled_affordance_points.activations = {1.0};
  cond.validate();
  return cond;
}

PointCloud single_point_cloud() {
  PointCloud c;
  c.points = {Vec3(0.0, 0.0, 0.0)};
  return c;
}

PointCloud elongated_cloud(bool along_x) {
  PointCloud c;
  const double a = 0.10, b = 0.01;
  for (double s : {-1.0, -0.5, 0.0, 0.5, 1.0})
    for (double u : {-1.0, 1.0})
      c.points.push_back(along_x ? Vec3(a * s, b * u, 0.0) : Vec3(b * u, a * s, 0.0));
  return c;
}

double standard_normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("linear schedules satisfy their declared algebra") {
  const NoiseSchedule s = NoiseSchedule::linear();
  CHECK(s.steps() == 100);
  CHECK(s.betas.front() == 1e-4);
  CHECK(s.betas.back() == 0.27);
  for (int i = 1; i + 1 < s.steps(); ++i) {
    const double expect = 1e-4 + (0.27 - 1e-4) * (static_cast<double>(i) / (s.steps() - 1));
    CHECK(s.betas[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK(s.alpha_bar(0) == 1.0);
  double prod = 1.0;
  for (int k = 1; k <= s.steps(); ++k) {
    const double beta = s.betas[static_cast<std::size_t>(k) - 1];
    CHECK(s.alphas[static_cast<std::size_t>(k) - 1] == 1.0 - beta);
    prod *= 1.0 - beta;
    CHECK(s.alpha_bar(k) == doctest::Approx(prod).epsilon(1e-12));
    CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
    // Reverse-posterior coefficients, written out from first principles.
    const double clean = std::sqrt(s.alpha_bar(k - 1)) * beta / (1.0 - s.alpha_bar(k));
    const double noisy =
        std::sqrt(1.0 - beta) * (1.0 - s.alpha_bar(k - 1)) / (1.0 - s.alpha_bar(k));
    const double var = (1.0 - s.alpha_bar(k - 1)) / (1.0 - s.alpha_bar(k)) * beta;
    CHECK(s.posterior_coeff_clean(k) == clean);
    CHECK(s.posterior_coeff_noisy(k) == noisy);
    CHECK(s.posterior_variance(k) == var);
    CHECK(var >= 0.0);
  }
  // The last reverse step is deterministic: variance zero, and the mean
  // passes the clean prediction through unchanged.
  CHECK(s.posterior_variance(1) == 0.0);
  CHECK(s.posterior_coeff_clean(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.posterior_coeff_noisy(1) == 0.0);
  // The terminal marginal keeps essentially nothing of the clean pose.
  CHECK(s.alpha_bar(s.steps()) < 1e-6);

  const NoiseSchedule one = NoiseSchedule::linear(1);
  CHECK(one.steps() == 1);
  CHECK(one.betas[0] == 1e-4);

  CHECK_THROWS_AS(s.alpha_bar(-1), Error);
  CHECK_THROWS_AS(s.alpha_bar(s.steps() + 1), Error);
  CHECK_THROWS_AS(s.posterior_variance(0), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(0), Error);

  NoiseSchedule bad = s;
  bad.alphas[3] += 1e-6;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.translation_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.betas[0] = 1.5;
  try {
    bad.validate();
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == "invalid_schedule");
  }
}

TEST_CASE("denoiser conditioning samples scene points by activation mass") {
  PointCloud scene_cloud;
  scene_cloud.points = {Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(-1, 0, 1)};
  AffordanceMap map;
  map.activations = {0.0, 0.8, 0.0};  // exactly one active point
  PointCloud object = single_point_cloud();

  RandomStream rng(4);
  const DenoiserCondition cond = DenoiserCondition::make(object, map, scene_cloud, 16, rng);
  REQUIRE(cond.sampled_affordance_points.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(cond.sampled_affordance_points.points[i] == Vec3(1, 2, 3));
    CHECK(cond.sampled_affordance_points.activations[i] == 0.8);
  }
  CHECK((cond.target_translation() - Vec3(1, 2, 3)).norm() < 1e-12);

  // Activation-weighted mean over a hand-built sample set.
  DenoiserCondition manual = point_condition(Vec3(0, 0, 0), object);
  manual.sampled_affordance_points.points = {Vec3(1, 0, 0), Vec3(3, 0, 0)};
  manual.sampled_affordance_points.activations = {1.0, 3.0};
  const Vec3 mean = manual.target_translation();
  CHECK(mean.x() == doctest::Approx((1.0 * 1.0 + 3.0 * 3.0) / 4.0).epsilon(1e-15));
  CHECK(mean.y() == 0.0);

  AffordanceMap zero;
  zero.activations = {0.0, 0.0, 0.0};
  RandomStream rng2(4);
  CHECK_THROWS_AS(DenoiserCondition::make(object, zero, scene_cloud, 4, rng2), Error);
  try {
    RandomStream rng3(4);
    DenoiserCondition::make(object, zero, scene_cloud, 4, rng3);
  } catch (const Error& e) {
    CHECK(e.kind() == "empty_affordance");
  }
  RandomStream rng4(4);
  CHECK_THROWS_AS(DenoiserCondition::make(object, map, scene_cloud, 0, rng4), Error);
}

TEST_CASE("the analytic denoiser blends toward the target and tangent yaw") {
  const NoiseSchedule sched = NoiseSchedule::linear();
  const Vec3 target(0.3, -0.2, 0.1);
  const DenoiserCondition cond = point_condition(target, single_point_cloud());

  for (int k : {1, 10, 25, 50}) {
    const double gamma = 1.0 - sched.alpha_bar(k);
    // A sample already at the target stays there.
    const Pose at_target = analytic_denoiser(Pose(target, 0.2), k, sched, cond);
    CHECK((at_target.t - target).norm() < 1e-12);
    // No anchors: yaw untouched (modulo a re-wrap, which can shift one ULP).
    CHECK(at_target.yaw == doctest::Approx(0.2).epsilon(1e-14));
    // A sample at the chain origin moves gamma of the way to the target.
    const Pose from_zero = analytic_denoiser(Pose(Vec3::Zero(), -0.7), k, sched, cond);
    CHECK(from_zero.t == gamma * target);
    CHECK(from_zero.yaw == doctest::Approx(-0.7).epsilon(1e-14));
  }
  // The frame center shifts the chain's origin: the same scene-frame sample
  // is expressed relative to it.
  DenoiserCondition centered = cond;
  centered.frame_center = target;
  const Pose settled = analytic_denoiser(Pose(Vec3::Zero(), 0.0), 25, sched, centered);
  CHECK(settled.t == Vec3::Zero());  // chain origin == target: nothing to correct

  // Yaw turns toward the tangent of the circle around the nearest anchor.
  const int k = 25;
  const double gamma = 1.0 - sched.alpha_bar(k);
  DenoiserCondition with_anchor = point_condition(Vec3::Zero(), elongated_cloud(true));
  with_anchor.anchor_positions = {Vec3(0.0, 0.0, 0.0)};
  const double r = 0.2;
  // Radially east of the anchor, the tangent runs north-south: a long-x
  // object turns toward +pi/2 (or the nearer half-turn branch).
  const Pose east_a = analytic_denoiser(Pose(Vec3(r, 0, 0), 0.4), k, sched, with_anchor);
  CHECK(east_a.yaw == doctest::Approx(0.4 + gamma * (M_PI / 2 - 0.4)).epsilon(1e-12));
  const Pose east_b = analytic_denoiser(Pose(Vec3(r, 0, 0), -0.4), k, sched, with_anchor);
  CHECK(east_b.yaw == doctest::Approx(-0.4 + gamma * (-M_PI / 2 + 0.4)).epsilon(1e-12));
  // A long-y object is already tangent-aligned there: yaw relaxes toward 0.
  DenoiserCondition tall = with_anchor;
  tall.object_points = elongated_cloud(false);
  const Pose east_tall = analytic_denoiser(Pose(Vec3(r, 0, 0), 0.4), k, sched, tall);
  CHECK(east_tall.yaw == doctest::Approx(0.4 * (1.0 - gamma)).epsilon(1e-12));
  // Degenerate radial direction: yaw is left alone.
  const Pose centered_pose = analytic_denoiser(Pose(Vec3::Zero(), 0.4), k, sched, with_anchor);
  CHECK(centered_pose.yaw == doctest::Approx(0.4).epsilon(1e-14));

  CHECK_THROWS_AS(analytic_denoiser(Pose(), 0, sched, cond), Error);
  CHECK_THROWS_AS(analytic_denoiser(Pose(), sched.steps() + 1, sched, cond), Error);
}

TEST_CASE("the spatial feature is inverse-distance-weighted activation") {
  PointCloud cloud;
  cloud.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0)};
  AffordanceMap map;
  map.activations = {1.0, 0.5, 0.25};
  const Pose pose(Vec3(0.2, 0.1, 0.0), 0.0);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const double w = 1.0 / ((cloud.points[j] - pose.t).norm() + 1e-6);
    num += w * map.activations[j];
    den += w;
  }
  CHECK(spatial_feature(pose, map, cloud) == num / den);
  // Sitting exactly on a point pins the value near that activation.
  CHECK(spatial_feature(Pose(Vec3(0, 2, 0), 0.0), map, cloud) ==
        doctest::Approx(0.25).epsilon(1e-4));

  AffordanceMap misaligned;
  misaligned.activations = {1.0};
  CHECK_THROWS_AS(spatial_feature(pose, misaligned, cloud), Error);
}

TEST_CASE("placement costs match brute force and central finite differences") {
  RandomStream rng(2024);
  auto random_cloud = [&](int n, double radius) {
    PointCloud c;
    for (int i = 0; i < n; ++i)
      c.points.push_back(radius * Vec3(2 * rng.uniform01() - 1, 2 * rng.uniform01() - 1,
                                       2 * rng.uniform01() - 1));
    return c;
  };

  SUBCASE("affordance cost") {
    int done = 0;
    while (done < 20) {
      const PointCloud object = random_cloud(15, 0.05);
      PointCloud targets = random_cloud(25, 0.2);
      const Pose pose(0.1 * Vec3(2 * rng.uniform01() - 1, 2 * rng.uniform01() - 1,
                                 2 * rng.uniform01() - 1),
                      2.0 * rng.uniform01() - 1.0);
      // Skip instances where a finite-difference probe could flip a
      // nearest-target assignment.
      bool well_separated = true;
      const Mat3 R = pose.rotation();
      for (const Vec3& o : object.points) {
        const Vec3 p = R * o + pose.t;
        double best = 1e300, second = 1e300;
        for (const Vec3& q : targets.points) {
          const double d = (q - p).norm();
          if (d < best) {
            second = best;
            best = d;
          } else if (d < second) {
            second = d;
          }
        }
        if (second - best < 1e-3) well_separated = false;
      }
      if (!well_separated) continue;
      ++done;

      const KdTree tree(targets.points);
      const CostResult res = cost_afford(pose, object, targets, &tree);
      const CostResult res_brute = cost_afford(pose, object, targets, nullptr);
      CHECK(res.value == res_brute.value);
      CHECK(res.d_t == res_brute.d_t);
      CHECK(res.d_yaw == res_brute.d_yaw);

      // Value equals the sum of squared nearest distances.
      double expect = 0.0;
      for (const Vec3& o : object.points) {
        const Vec3 p = R * o + pose.t;
        double best = 1e300;
        for (const Vec3& q : targets.points) best = std::min(best, (q - p).squaredNorm());
        expect += best;
      }
      CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));

      const double h = 1e-6;
      for (int d = 0; d < 3; ++d) {
        Pose lo = pose, hi = pose;
        lo.t[d] -= h;
        hi.t[d] += h;
        const double fd = (cost_afford(hi, object, targets, &tree).value -
                           cost_afford(lo, object, targets, &tree).value) /
                          (2 * h);
        CHECK(std::abs(res.d_t[d] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
      const Pose ylo(pose.t, pose.yaw - h);
      const Pose yhi(pose.t, pose.yaw + h);
      const double fd_yaw = (cost_afford(yhi, object, targets, &tree).value -
                             cost_afford(ylo, object, targets, &tree).value) /
                            (2 * h);
      CHECK(std::abs(res.d_yaw - fd_yaw) <= 1e-5 * std::max(1.0, std::abs(fd_yaw)));
    }
  }

  SUBCASE("collision cost") {
    // One box-shaped obstacle around the origin.
    PointCloud box;
    for (int ix = 0; ix <= 10; ++ix)
      for (int iy = 0; iy <= 10; ++iy)
        for (int iz = 0; iz <= 10; ++iz) {
          const Vec3 p(-0.05 + 0.01 * ix, -0.05 + 0.01 * iy, 0.01 * iz);
          const bool shell = ix == 0 || ix == 10 || iy == 0 || iy == 10 || iz == 0 || iz == 10;
          if (shell) box.points.push_back(p);
        }
    const TsdfGrid grid = build_tsdf({box}, 0.01, 0.03, 0.05);
    const PointCloud object = random_cloud(10, 0.02);

    int done = 0;
    int attempts = 0;
    while (done < 20 && attempts < 4000) {
      ++attempts;
      const Pose pose(Vec3(0.08 * (2 * rng.uniform01() - 1), 0.08 * (2 * rng.uniform01() - 1),
                           0.05 + 0.04 * (2 * rng.uniform01() - 1)),
                      2.0 * rng.uniform01() - 1.0);
      // Keep every probe point away from interpolation-cell faces and from
      // the sign kink so the cost is smooth across the difference stencil.
      const Mat3 R = pose.rotation();
      bool smooth = true;
      bool any_inside = false;
      for (const Vec3& o : object.points) {
        const Vec3 p = R * o + pose.t;
        const TsdfSample smp = tsdf_query(grid, p);
        if (std::abs(smp.value) < 1e-3) smooth = false;
        if (smp.value < 0.0) any_inside = true;
        for (int d = 0; d < 3; ++d) {
          const double cell = (p[d] - grid.origin[d]) / grid.voxel_size;
          const double frac = cell - std::floor(cell);
          if (std::min(frac, 1.0 - frac) < 1e-2) smooth = false;
        }
      }
      if (!smooth || !any_inside) continue;
      ++done;

      const CostResult res = cost_collide(pose, object, grid);
      double expect = 0.0;
      for (const Vec3& o : object.points) {
        const double v = tsdf_query(grid, R * o + pose.t).value;
        expect -= std::min(v, 0.0);
      }
      CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));
      CHECK(res.value > 0.0);

      const double h = 1e-6;
      for (int d = 0; d < 3; ++d) {
        Pose lo = pose, hi = pose;
        lo.t[d] -= h;
        hi.t[d] += h;
        const double fd =
            (cost_collide(hi, object, grid).value - cost_collide(lo, object, grid).value) /
            (2 * h);
        CHECK(std::abs(res.d_t[d] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
      const Pose ylo(pose.t, pose.yaw - h);
      const Pose yhi(pose.t, pose.yaw + h);
      const double fd_yaw =
          (cost_collide(yhi, object, grid).value - cost_collide(ylo, object, grid).value) /
          (2 * h);
      CHECK(std::abs(res.d_yaw - fd_yaw) <= 1e-4 * std::max(1.0, std::abs(fd_yaw)));
    }
    CHECK(done == 20);

    // Far from the obstacle the cost and gradient vanish.
    const CostResult free = cost_collide(Pose(Vec3(5, 5, 5), 0.3), object, grid);
    CHECK(free.value == 0.0);
    CHECK(free.d_t == Vec3::Zero());
    CHECK(free.d_yaw == 0.0);
  }
}

TEST_CASE("guided reverse steps follow the posterior algebra") {
  const NoiseSchedule sched = NoiseSchedule::linear();
  PointCloud object;
  object.points = {Vec3(0.02, 0, 0), Vec3(-0.02, 0, 0), Vec3(0, 0.03, 0), Vec3(0, -0.01, 0),
                   Vec3(0, 0, 0.02)};
  PointCloud targets;
  targets.points = {Vec3(0.31, -0.18, 0.12), Vec3(0.28, -0.22, 0.09), Vec3(0.35, -0.2, 0.1)};
  const KdTree tree(targets.points);

  DenoiserCondition cond = point_condition(Vec3(0.3, -0.2, 0.1), object);
  cond.frame_center = cond.target_translation();

  GuidanceConfig off;
  off.afford_enabled = false;
  off.collide_enabled = false;
  GuidanceContext no_ctx;

  // k = 1 is deterministic and, unguided, returns the clean prediction.
  const Pose pose1(Vec3(0.02, -0.01, 0.03), 0.25);
  RandomStream rng_a(1), rng_b(999);
  const Pose out_a = guided_reverse_step(pose1, 1, cond, sched, off, no_ctx, rng_a);
  const Pose out_b = guided_reverse_step(pose1, 1, cond, sched, off, no_ctx, rng_b);
  CHECK(out_a.t == out_b.t);
  CHECK(out_a.yaw == out_b.yaw);
  const Pose clean = analytic_denoiser(pose1, 1, sched, cond);
  // coeff_clean(1) = beta_1 / (1 - alpha_bar_1) is 1 up to the cancellation
  // error of 1 - (1 - beta_1), about 1e-12 relative at beta_1 = 1e-4.
  CHECK((out_a.t - clean.t).norm() < 1e-12);
  CHECK(out_a.yaw == doctest::Approx(clean.yaw).epsilon(1e-12));

  // At k > 1, guidance shifts the sample by exactly
  // coeff_clean * (scale * correction), noise being identical under one seed.
  const int k = 25;
  const Pose pose_k(Vec3(0.05, -0.03, 0.02), 0.3);
  GuidanceConfig weak;
  weak.lambda_afford = 2.0;
  weak.collide_enabled = false;
  GuidanceContext ctx;
  ctx.targets = &targets;
  ctx.target_tree = &tree;

  StepDiagnostics diag;
  RandomStream rng_g(77), rng_u(77);
  const Pose guided = guided_reverse_step(pose_k, k, cond, sched, weak, ctx, rng_g, &diag);
  const Pose unguided = guided_reverse_step(pose_k, k, cond, sched, off, no_ctx, rng_u);

  const Pose predicted = analytic_denoiser(pose_k, k, sched, cond);
  const Pose predicted_scene(predicted.t + cond.frame_center, predicted.yaw);
  const CostResult ca = cost_afford(predicted_scene, object, targets, &tree);
  CHECK(diag.cost_afford == ca.value);
  CHECK_FALSE(diag.clamped);
  CHECK_FALSE(diag.non_finite_gradient);

  const double s = sched.translation_scale;
  const double s_yaw = sched.yaw_scale;
  const double variance = sched.posterior_variance(k);
  const double clamp_u = weak.gradient_clamp / s;
  const double coeff_clean = sched.posterior_coeff_clean(k);
  for (int d = 0; d < 3; ++d) {
    const double delta_u = -variance * s * weak.lambda_afford * ca.d_t[d];
    REQUIRE(std::abs(delta_u) < clamp_u);  // weak guidance must not clamp
    CHECK(std::abs((guided.t[d] - unguided.t[d]) - coeff_clean * s * delta_u) < 1e-10);
  }
  const double delta_yaw_u = -variance * s_yaw * weak.lambda_afford * ca.d_yaw;
  REQUIRE(std::abs(delta_yaw_u) < clamp_u);
  CHECK(std::abs(wrap_angle(guided.yaw - unguided.yaw) - coeff_clean * s_yaw * delta_yaw_u) <
        1e-10);

  // Savage weights saturate the per-component clamp: the shift magnitude is
  // exactly coeff_clean * gradient_clamp (pi/6-equivalent for yaw).
  GuidanceConfig strong = weak;
  strong.lambda_afford = 1e9;
  StepDiagnostics diag_s;
  RandomStream rng_s(77), rng_u2(77);
  const Pose clamped = guided_reverse_step(pose_k, k, cond, sched, strong, ctx, rng_s, &diag_s);
  const Pose unguided2 = guided_reverse_step(pose_k, k, cond, sched, off, no_ctx, rng_u2);
  CHECK(diag_s.clamped);
  for (int d = 0; d < 3; ++d) {
    REQUIRE(ca.d_t[d] != 0.0);
    CHECK(std::abs(clamped.t[d] - unguided2.t[d]) ==
          doctest::Approx(coeff_clean * strong.gradient_clamp).epsilon(1e-12));
  }
  REQUIRE(ca.d_yaw != 0.0);
  CHECK(std::abs(wrap_angle(clamped.yaw - unguided2.yaw)) ==
        doctest::Approx(coeff_clean * s_yaw * clamp_u).epsilon(1e-12));

  // The spatial-activation diagnostic reports the coarse map at the noisy pose.
  PointCloud scene_cloud;
  scene_cloud.points = {cond.sampled_affordance_points.points[0]};
  GuidanceContext with_cloud = ctx;
  with_cloud.scene_cloud = &scene_cloud;
  StepDiagnostics diag_c;
  RandomStream rng_c(5);
  guided_reverse_step(pose_k, k, cond, sched, weak, with_cloud, rng_c, &diag_c);
  const Pose scene_pose_k(pose_k.t + cond.frame_center, pose_k.yaw);
  CHECK(diag_c.spatial_activation == spatial_feature(scene_pose_k, cond.coarse_map, scene_cloud));

  RandomStream rng_e(1);
  CHECK_THROWS_AS(guided_reverse_step(pose_k, 0, cond, sched, weak, ctx, rng_e), Error);
  CHECK_THROWS_AS(guided_reverse_step(pose_k, sched.steps() + 1, cond, sched, weak, ctx, rng_e),
                  Error);
}

TEST_CASE("forward noising reproduces the closed-form marginal") {
  const NoiseSchedule sched = NoiseSchedule::linear();
  const Pose pose0(Vec3(0.1, -0.05, 0.2), 0.6);
  for (int k : {1, 7, 50}) {
    RandomStream rng(31), replay(31);
    const Pose noised = forward_noise(pose0, k, sched, rng);
    const double ab = sched.alpha_bar(k);
    const Vec3 eps(replay.normal(), replay.normal(), replay.normal());
    const double eps_yaw = replay.normal();
    const Vec3 expect_t =
        std::sqrt(ab) * pose0.t + std::sqrt(1.0 - ab) * sched.translation_scale * eps;
    const double expect_yaw =
        wrap_angle(std::sqrt(ab) * pose0.yaw + std::sqrt(1.0 - ab) * sched.yaw_scale * eps_yaw);
    CHECK(noised.t == expect_t);
    CHECK(noised.yaw == expect_yaw);
  }

  // At the terminal step the marginal of a zero pose is exactly
  // N(0, (1 - alpha_bar_K) * scale^2): a one-sample KS test against the
  // standard normal must accept (critical value at alpha ~ 0.001).
  const int n = 500;
  std::vector<double> z;
  z.reserve(n);
  RandomStream rng(99);
  const double denom =
      sched.translation_scale * std::sqrt(1.0 - sched.alpha_bar(sched.steps()));
  for (int i = 0; i < n; ++i) {
    const Pose p = forward_noise(Pose(), sched.steps(), sched, rng);
    z.push_back(p.t.x() / denom);
  }
  std::sort(z.begin(), z.end());
  double d_stat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = standard_normal_cdf(z[static_cast<std::size_t>(i)]);
    d_stat = std::max(d_stat, std::max(cdf - static_cast<double>(i) / n,
                                       static_cast<double>(i + 1) / n - cdf));
  }
  CHECK(d_stat < 1.949 / std::sqrt(static_cast<double>(n)));

  RandomStream rng2(1);
  CHECK_THROWS_AS(forward_noise(pose0, 0, sched, rng2), Error);
}

TEST_CASE("unguided chains centered on the target are unbiased") {
  const NoiseSchedule sched = NoiseSchedule::linear();
  const Vec3 target(0.3, 0.2, 0.05);
  DenoiserCondition cond = point_condition(target, single_point_cloud());
  cond.frame_center = target;  // chain origin on the target
  GuidanceConfig off;
  off.afford_enabled = false;
  off.collide_enabled = false;
  GuidanceContext no_ctx;

  // Predicted terminal moments from the per-step linear recursion: each
  // reverse step applies mean factor m_k = coeff_clean * alpha_bar_k +
  // coeff_noisy and adds posterior-variance noise.
  double var_pred = 1.0;  // normalized units; prior is the unit normal
  for (int k = sched.steps(); k >= 1; --k) {
    const double m =
        sched.posterior_coeff_clean(k) * sched.alpha_bar(k) + sched.posterior_coeff_noisy(k);
    var_pred = m * m * var_pred + sched.posterior_variance(k);
  }
  const double s = sched.translation_scale;
  const double sd_pred = std::sqrt(var_pred) * s;

  const int n = 800;
  Vec3 sum = Vec3::Zero();
  Vec3 sum_sq = Vec3::Zero();
  RandomStream rng(123);
  for (int c = 0; c < n; ++c) {
    Pose pose(s * Vec3(rng.normal(), rng.normal(), rng.normal()),
              sched.yaw_scale * rng.normal());
    for (int k = sched.steps(); k >= 1; --k)
      pose = guided_reverse_step(pose, k, cond, sched, off, no_ctx, rng);
    sum += pose.t;
    sum_sq += pose.t.cwiseProduct(pose.t);
  }
  const Vec3 mean = sum / n;
  const double se = sd_pred / std::sqrt(static_cast<double>(n));
  for (int d = 0; d < 3; ++d) {
    CHECK(std::abs(mean[d]) <= 3.0 * se);  // unbiased in chain coordinates
    const double sd = std::sqrt(sum_sq[d] / n - mean[d] * mean[d]);
    CHECK(sd == doctest::Approx(sd_pred).epsilon(0.10));
  }
}

TEST_CASE("plan placement returns ranked, snapped, reproducible candidates") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  std::vector<GraphNode> nodes;
  GraphNode plate;
  plate.id = 0;
  plate.category = "plate";
  plate.centroid = Vec3(0.1, 0.0, 0.05);
  GraphNode mug;
  mug.id = 1;
  mug.category = "mug";
  mug.centroid = Vec3(-0.25, 0.1, 0.05);
  nodes = {plate, mug};
  const Scene scene = instantiate(build_graph(nodes, 0.0), lib, Vec3(0.9, 0.7, 0.04), 21);
  const SceneObject* anchor = nullptr;
  for (const SceneObject& obj : scene.objects)
    if (obj.category == "plate") anchor = &obj;
  REQUIRE(anchor != nullptr);

  StructuredPlan plan;
  plan.anchor_id = anchor->id;
  plan.anchor_category = anchor->category;
  plan.anchor_position = anchor->pose.t;
  plan.direction = Relation::Front;

  const PointCloud subject = lib.make_object("cup", 99, 7).points;
  PlannerConfig config;
  config.seed = 11;
  const auto candidates = plan_placement(scene, {plan}, subject, 4, config);
  REQUIRE(candidates.size() == 4);
  for (std::size_t i = 0; i + 1 < candidates.size(); ++i)
    CHECK(candidates[i].final_cost <= candidates[i + 1].final_cost);
  for (const PlacementCandidate& cand : candidates) {
    CHECK(cand.pose.t.z() ==
          support_height_at(scene, Vec2(cand.pose.t.x(), cand.pose.t.y())));
    CHECK(std::isfinite(cand.final_cost));
    CHECK(cand.final_cost ==
          config.guidance.lambda_afford * cand.cost_afford +
              config.guidance.lambda_collide * cand.cost_collide);
    CHECK_FALSE(cand.infeasible_region);
    CHECK_FALSE(cand.non_finite_gradient);
  }

  const auto rerun = plan_placement(scene, {plan}, subject, 4, config);
  REQUIRE(rerun.size() == candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CHECK(rerun[i].pose.t == candidates[i].pose.t);
    CHECK(rerun[i].pose.yaw == candidates[i].pose.yaw);
    CHECK(rerun[i].final_cost == candidates[i].final_cost);
  }
  PlannerConfig other = config;
  other.seed = 12;
  const auto different = plan_placement(scene, {plan}, subject, 4, other);
  bool any_differs = false;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    any_differs = any_differs || different[i].pose.t != candidates[i].pose.t;
  CHECK(any_differs);

  // Contradictory constraints yield an empty region: flagged, not fatal.
  StructuredPlan left = plan, right = plan;
  left.direction = Relation::Left;
  right.direction = Relation::Right;
  const auto flagged = plan_placement(scene, {left, right}, subject, 2, config);
  for (const PlacementCandidate& cand : flagged) CHECK(cand.infeasible_region);

  CHECK_THROWS_AS(plan_placement(scene, {}, subject, 2, config), Error);
  CHECK_THROWS_AS(plan_placement(scene, {plan}, subject, 0, config), Error);
  PlannerConfig bad = config;
  bad.tsdf_truncation = bad.tsdf_voxel;  // below the two-voxel minimum
  CHECK_THROWS_AS(plan_placement(scene, {plan}, subject, 2, bad), Error);
}
