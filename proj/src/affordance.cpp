// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/affordance.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "placekit/json_util.hpp"

namespace placekit {

namespace {

constexpr double kContactMargin = 0.02;  // gap between touching footprints
constexpr double kSupportCutoff = 0.03;  // compass fields vanish above this
constexpr double kCoarseSigma = 0.05;      // falloff around cluster centers
constexpr double kActiveThreshold = 0.1;   // pooled activation gate for k-means
constexpr int kLloydIterations = 20;
constexpr double kLloydTolerance = 1e-6;

}  // namespace

AffordanceMap plan_affordance(const Scene& scene, const StructuredPlan& plan,
                              const Vec3& subject_extent) {
  const SceneObject* anchor = scene.find(plan.anchor_id);
  if (anchor == nullptr || anchor->id == scene.receptacle.id)
    fail("unresolvable_anchor",
         "plan_affordance: anchor id " + std::to_string(plan.anchor_id) + " not in scene");
  const double sigma = footprint_radius(subject_extent);
  if (!(sigma > 0.0)) fail("invalid_argument", "plan_affordance: subject extent must be positive");

  const PointCloud cloud = scene.scene_cloud();
  AffordanceMap map;
  map.reference = "scene_cloud";
  map.activations.assign(cloud.size(), 0.0);
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

  if (plan.direction == Relation::On) {
    const Footprint fp = anchor->world_footprint();
    const Vec2 c2 = fp.center();
    const Vec3 c_top(c2.x(), c2.y(), fp.zmax);
    for (const Scene::CloudSegment& seg : scene.cloud_layout()) {
      if (seg.object_id != anchor->id) continue;
      for (std::size_t j = seg.start; j < seg.start + seg.count; ++j)
        if (cloud.points[j].z() >= fp.zmax - kTopSurfaceBand)
          map.activations[j] = std::exp(-(cloud.points[j] - c_top).squaredNorm() * inv_two_sigma2);
    }
    return map;
  }

  const double delta = footprint_radius(anchor->extent) + sigma + kContactMargin;
  const Vec2 u = relation_unit(plan.direction, scene.viewer_yaw());
  const Vec3 c_star = plan.anchor_position + delta * Vec3(u.x(), u.y(), 0.0);
  const double z_cut = scene.support_height() + kSupportCutoff;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    if (cloud.points[j].z() > z_cut) continue;
    map.activations[j] = std::exp(-(cloud.points[j] - c_star).squaredNorm() * inv_two_sigma2);
  }
  return map;
}

AffordanceMap compose_coarse(const std::vector<AffordanceMap>& maps, const PointCloud& scene_cloud,
                             int k, int top_k) {
  if (maps.empty()) fail("invalid_argument", "compose_coarse: no input maps");
  if (k < 1) fail("invalid_argument", "compose_coarse: k must be >= 1");
  if (top_k <= 0 || top_k > k) top_k = k;
  const std::size_t n = scene_cloud.size();
  for (const AffordanceMap& m : maps) m.validate(n);

  // Max pooling makes the clustering input invariant to duplicated maps.
  std::vector<double> pooled(n, 0.0);
  for (const AffordanceMap& m : maps)
    for (std::size_t j = 0; j < n; ++j) pooled[j] = std::max(pooled[j], m.activations[j]);

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < n; ++j)
    if (pooled[j] > kActiveThreshold) active.push_back(j);
  if (active.empty())
    fail("empty_affordance", "compose_coarse: no point exceeds the activation threshold");

  double total = 0.0;
  for (std::size_t i : active) total += pooled[i];
  std::vector<double> weight(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) weight[a] = pooled[active[a]] / total;

  // Weighted k-means++ seeding, fixed stream so composition is deterministic.
  RandomStream rng(0);
  std::vector<Vec3> centers;
  centers.push_back(scene_cloud.points[active[rng.weighted_pick(weight)]]);
  std::vector<double> d2(active.size());
  while (static_cast<int>(centers.size()) < k) {
    double mass = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& c : centers)
        best = std::min(best, (scene_cloud.points[active[a]] - c).squaredNorm());
      d2[a] = best * weight[a];
      mass += d2[a];
    }
    if (!(mass > 0.0)) {
      centers.push_back(centers.front());  // all active points already covered
      continue;
    }
    centers.push_back(scene_cloud.points[active[rng.weighted_pick(d2)]]);
  }

  std::vector<int> assign(active.size(), 0);
  for (int it = 0; it < kLloydIterations; ++it) {
    for (std::size_t a = 0; a < active.size(); ++a) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = (scene_cloud.points[active[a]] - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      assign[a] = arg;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      Vec3 acc = Vec3::Zero();
      double mass = 0.0;
      for (std::size_t a = 0; a < active.size(); ++a)
        if (assign[a] == c) {
          acc += weight[a] * scene_cloud.points[active[a]];
          mass += weight[a];
        }
      if (mass > 0.0) {
        const Vec3 next = acc / mass;
        shift = std::max(shift, (next - centers[c]).norm());
        centers[c] = next;
      }
    }
    if (shift < kLloydTolerance) break;
  }

  std::vector<double> cluster_mass(k, 0.0);
  for (std::size_t a = 0; a < active.size(); ++a) cluster_mass[assign[a]] += weight[a];
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return cluster_mass[a] > cluster_mass[b]; });

  AffordanceMap out;
  out.reference = maps.front().reference;
  out.activations.assign(n, 0.0);
  const double inv_two_sigma2 = 1.0 / (2.0 * kCoarseSigma * kCoarseSigma);
  for (std::size_t j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < top_k; ++s)
      best = std::min(best, (scene_cloud.points[j] - centers[order[s]]).squaredNorm());
    out.activations[j] = std::exp(-best * inv_two_sigma2);
  }
  return out;
}

AffordanceMap compose_fine(const std::vector<AffordanceMap>& maps) {
  if (maps.empty()) fail("invalid_argument", "compose_fine: no input maps");
  const std::size_t n = maps.front().activations.size();
  for (const AffordanceMap& m : maps) m.validate(n);
  AffordanceMap out;
  out.reference = maps.front().reference;
  out.activations.assign(n, 0.0);
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (std::size_t j = 0; j < n; ++j) {
    double mx = 0.0, sum = 0.0;
    for (const AffordanceMap& m : maps) {
      mx = std::max(mx, m.activations[j]);
      sum += m.activations[j];
    }
    out.activations[j] = std::max(mx, sum * inv);
  }
  return out;
}

PointCloud high_affordance_points(const AffordanceMap& map, const PointCloud& scene_cloud,
                                  double threshold_frac) {
  map.validate(scene_cloud.size());
  if (!(threshold_frac >= 0.0 && threshold_frac <= 1.0))
    fail("invalid_argument", "high_affordance_points: threshold_frac must be in [0,1]");
  const double mx = *std::max_element(map.activations.begin(), map.activations.end());
  if (!(mx > 0.0)) fail("empty_affordance", "high_affordance_points: map is all zero");
  const double threshold = threshold_frac * mx;
  PointCloud out;
  for (std::size_t j = 0; j < scene_cloud.size(); ++j)
    if (map.activations[j] >= threshold) {
      out.points.push_back(scene_cloud.points[j]);
      out.activations.push_back(map.activations[j]);
    }
  return out;
}

void save_affordance(const AffordanceMap& map, const std::string& sidecar_path,
                     const std::string& payload_path,
                     const std::map<std::string, double>& params) {
  {
    std::ofstream out(payload_path, std::ios::binary);
    if (!out) fail("io_error", "save_affordance: cannot open " + payload_path);
    for (double a : map.activations) {
      const float f = static_cast<float>(a);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    if (!out) fail("io_error", "save_affordance: write failed for " + payload_path);
  }
  json j;
  j["schema_version"] = 1;
  j["reference"] = map.reference;
  j["count"] = map.activations.size();
  j["dtype"] = "float32";
  j["payload"] = std::filesystem::path(payload_path).filename().string();
  json p = json::object();
  for (const auto& [key, value] : params) p[key] = value;
  j["params"] = std::move(p);
  save_json_file(j, sidecar_path, "save_affordance");
}

AffordanceMap load_affordance(const std::string& sidecar_path) {
  const json j = load_json_file(sidecar_path, "load_affordance");
  check_keys(j, {"schema_version", "reference", "count", "dtype", "payload"}, {"params"},
             "affordance");
  check_schema_version(j, 1, "affordance");
  if (j.at("dtype").get<std::string>() != "float32")
    fail("schema_error", "load_affordance: dtype must be float32");
  const auto count = j.at("count").get<std::size_t>();
  const std::string payload =
      (std::filesystem::path(sidecar_path).parent_path() / j.at("payload").get<std::string>())
          .string();
  std::ifstream in(payload, std::ios::binary);
  if (!in) fail("io_error", "load_affordance: cannot open " + payload);
  AffordanceMap map;
  map.reference = j.at("reference").get<std::string>();
  map.activations.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof(f));
    if (!in) fail("io_error", "load_affordance: payload truncated in " + payload);
    map.activations[i] = static_cast<double>(f);
  }
  return map;
}

}  // namespace placekit
