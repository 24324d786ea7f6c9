// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "placekit/scene_graph.hpp"

namespace placekit {

/// Pairwise penetration (meters) up to which contact counts as
/// collision-free; shared by generation and evaluation.
constexpr double kPenetrationEps = 0.005;

/// Procedural shape source: per category a primitive kind and extent
/// sampling ranges. Composite categories (mug, bottle, plant, lamp) are
/// fixed two/three-part layouts scaled to the sampled extent.
class ShapeLibrary {
public:
  enum class Kind { Box, Cylinder, Composite };
  struct Entry {
    Kind kind = Kind::Box;
    /// Extent ranges; round-base entries sample (diameter, height) from the
    /// x and z components and force equal horizontal extents.
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{0.0, 0.0, 0.0};
    bool round_base = false;
  };

  /// Tabletop catalog matching SimilarityTable::builtin()'s categories.
  static ShapeLibrary builtin();

  bool has(const std::string& category) const;
  const Entry& entry(const std::string& category) const;
  std::vector<std::string> categories() const;

  /// Extent make_object would produce for this (category, seed) pair,
  /// without sampling surface points (used to pre-plan layouts).
  Vec3 sample_extent(const std::string& category, std::uint64_t rng_seed) const;

  /// Surface-sampled upright object: base at z = 0, horizontal AABB
  /// centered at the origin, extent equal to the exact point AABB. A
  /// quarter-turn count drawn per object orients elongated shapes; the
  /// rotation is baked into the points so the stored pose stays identity.
  SceneObject make_object(const std::string& category, int id, std::uint64_t rng_seed,
                          int n_points = 420) const;

private:
  std::map<std::string, Entry> entries_;
};

/// Realizes a graph as a concrete scene: one procedural object per node at
/// the node's horizontal centroid, bases snapped to the receptacle top
/// ("on"-edge children to their parent's top). Per-node geometry draws from
/// derive_seed(rng_seed, node id). Node centroids must fall inside the given
/// receptacle extent; the receptacle then grows as needed so every footprint
/// fits with a 2 cm margin.
Scene instantiate(const SceneGraph& graph, const ShapeLibrary& library,
                  const Vec3& receptacle_extent, std::uint64_t rng_seed);

/// Per-gradient-step record of a refinement run (for auditing the
/// no-penetration-increase guarantee).
struct RefineTrace {
  struct Step {
    int object_id = 0;
    double penetration_before = 0.0;
    double penetration_after = 0.0;
    bool accepted = false;
  };
  std::vector<Step> steps;
};

struct RefineResult {
  Scene scene;
  std::vector<int> removed_ids;
};

/// Collision resolution: repeatedly takes the worst-penetrating object (ties
/// to the lower id), freezes the rest, and ascends the rest-of-scene TSDF
/// over its horizontal translation (sum over its surface points, minus
/// reg_weight * squared displacement) for at most `steps` fixed-length
/// gradient steps. Steps are accepted only if the objective improves and the
/// object's penetration does not increase; objects stacked on a moved object
/// ride along. Objects still penetrating more than kPenetrationEps are
/// removed (with their stack). The result has max pairwise penetration
/// <= kPenetrationEps.
RefineResult refine_poses(const Scene& scene, int steps = 10, double step_size = 0.01,
                          double reg_weight = 10.0, RefineTrace* trace = nullptr);

/// Training/benchmark unit: a scene with one object removed, the removed
/// object with its ground-truth pose, relation plans against sampled
/// anchors, and the ground-truth placement activation map.
struct LabeledSample {
  Scene scene;
  SceneObject dropped_object;
  Pose gt_pose;
  std::vector<StructuredPlan> plans;
  AffordanceMap gt_map;
};

/// Drops one object (uniformly among objects that carry no stack and have at
/// least n_plans region-consistent anchors) and samples n_plans distinct
/// anchors. Stacked objects use their supporting object with an "on" plan;
/// free-standing ones use anchors whose center distance lies in the
/// annotation radial band, so the ground truth always satisfies its own
/// plans.
LabeledSample make_sample(const Scene& scene, int n_plans, std::uint64_t rng_seed);

/// Shared penetration measure between two placed objects (minimal
/// translation distance of their footprint prisms).
double object_penetration(const SceneObject& a, const SceneObject& b);

/// Max pairwise penetration among non-receptacle objects (0 for <= 1).
double max_scene_penetration(const Scene& scene);

/// Ids of objects stacked directly on `base` (footprint center inside the
/// base hull, base height within kStackTolerance of the base top).
std::vector<int> stacked_on(const Scene& scene, const SceneObject& base);

/// The object `obj` rests on, or nullptr when it sits on the receptacle.
const SceneObject* support_of(const Scene& scene, const SceneObject& obj);

/// Sample directory layout: scene.json (+ per-object PLY clouds),
/// plans.json, gt.json (dropped object, pose, activation array aligned with
/// the scene-cloud point order), dropped.ply.
void save_sample(const LabeledSample& sample, const std::string& dir);
LabeledSample load_sample(const std::string& dir);

}  // namespace placekit
