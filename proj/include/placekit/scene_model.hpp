// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "placekit/geometry.hpp"

namespace placekit {

/// Closed set of pairwise placement relations. Directions are expressed in
/// the viewer frame: +x is the viewer's right, +y points away from the
/// viewer ("behind" the anchor).
enum class Relation {
  Left,
  Right,
  Front,
  Behind,
  LeftFront,
  LeftBehind,
  RightFront,
  RightBehind,
  On,
};

constexpr int kNumRelations = 9;

/// Shared placement tolerances (meters / radians).
/// A subject is stacked "on" an anchor when its base is within
/// kStackTolerance of the anchor's top and its footprint center lies inside
/// the anchor's hull; free-standing objects rest within kRestTolerance of
/// the support; horizontal displacements under kAmbiguityThreshold have no
/// compass direction; an object's "top surface" is the band within
/// kTopSurfaceBand of its maximum height.
constexpr double kStackTolerance = 0.02;
constexpr double kRestTolerance = 0.005;
constexpr double kAmbiguityThreshold = 1e-3;
constexpr double kTopSurfaceBand = 0.01;

std::string relation_name(Relation r);
Relation relation_from_name(const std::string& name);
/// All nine relations in a stable order.
const std::vector<Relation>& all_relations();

/// Viewer-frame direction angle in radians for the eight compass relations
/// (right = 0, counter-clockwise positive); empty for "on".
std::optional<double> relation_angle(Relation r);

/// Scene-frame horizontal unit vector for a compass relation under the given
/// viewer yaw.
Vec2 relation_unit(Relation r, double viewer_yaw);

/// Scene-frame pose that preserves its authored form: planner-style
/// translation + yaw, or a full unit quaternion (norm within 1e-9) for
/// authored scenes. The authored form is what serialization re-emits.
struct ScenePose {
  Vec3 t{0.0, 0.0, 0.0};
  double yaw = 0.0;
  std::optional<Eigen::Quaterniond> quat;

  ScenePose() = default;
  ScenePose(const Vec3& translation, double yaw_radians)
      : t(translation), yaw(wrap_angle(yaw_radians)) {}
  static ScenePose from_quat(const Vec3& translation, const Eigen::Quaterniond& q);

  void validate() const;
  Vec3 apply(const Vec3& p) const;
  /// Yaw about +z; quaternion poses project their rotated +x axis.
  double yaw_value() const;
  Pose as_pose() const { return Pose(t, yaw_value()); }
};

/// One physical object: surface samples in the object frame (base at z = 0,
/// horizontal center at the origin) plus the authored scene-frame pose.
/// Invariants: id unique per scene, points non-empty, extent > 0 per axis.
struct SceneObject {
  int id = 0;
  std::string category;
  PointCloud points;
  ScenePose pose;
  Vec3 extent{0.0, 0.0, 0.0};

  PointCloud world_points() const;
  Footprint world_footprint() const { return Footprint::of(world_points().points); }
  void validate() const;
};

/// Half-diagonal of the horizontal extent; rotation-invariant object radius.
inline double footprint_radius(const Vec3& extent) {
  return 0.5 * std::hypot(extent.x(), extent.y());
}

struct Camera {
  CameraIntrinsics intrinsics;
  ScenePose pose;
};

/// A receptacle (supporting surface) plus the objects resting on it.
/// Invariant: every object's base height is within 5 mm of the support
/// height unless it is stacked on another object (base within 2 cm of that
/// object's top).
struct Scene {
  SceneObject receptacle;
  std::vector<SceneObject> objects;
  std::optional<Camera> camera;
  Vec3 gravity{0.0, 0.0, -1.0};

  /// Camera yaw projected on the support plane; 0 without a camera.
  double viewer_yaw() const;
  /// Top of the receptacle in the scene frame.
  double support_height() const;
  const SceneObject* find(int id) const;
  /// Index range of each object's points inside scene_cloud(): receptacle
  /// first, then objects in ascending id order.
  struct CloudSegment {
    int object_id;
    std::size_t start;
    std::size_t count;
  };
  std::vector<CloudSegment> cloud_layout() const;
  /// Concatenated world-frame points in cloud_layout() order.
  PointCloud scene_cloud() const;
  void validate() const;
};

/// Highest support surface under a horizontal location: the receptacle top,
/// raised to the top of any object whose footprint contains the point.
double support_height_at(const Scene& scene, const Vec2& xy);

/// Pairwise placement constraint consumed from upstream plan files.
struct StructuredPlan {
  int anchor_id = 0;
  std::string anchor_category;
  Vec3 anchor_position{0.0, 0.0, 0.0};
  Relation direction = Relation::Right;
  std::optional<Eigen::Vector4d> anchor_bbox_2d;
};

/// Relation between two placed objects. "on" when the subject's footprint
/// center lies inside the anchor's footprint with its base within 2 cm of
/// the anchor's top; otherwise the horizontal displacement is binned into
/// eight 45-degree sectors in the viewer frame. Horizontal displacement
/// under 1 mm (and not "on") is ambiguous and an error.
Relation classify_relation(const SceneObject& anchor, const SceneObject& subject,
                           double viewer_yaw);

/// Sector classification of a bare centroid displacement (used for graph
/// edges, where only centroids exist): horizontal displacement under 1 mm
/// with a vertical offset is "on"; exactly coincident centroids fall back to
/// "right" deterministically.
Relation classify_displacement(const Vec3& anchor_centroid, const Vec3& subject_centroid,
                               double viewer_yaw);

/// Per-point activation in [0,1], index-aligned with a referenced scene
/// cloud (see Scene::cloud_layout()).
struct AffordanceMap {
  std::vector<double> activations;
  std::string reference;

  void validate(std::size_t expected_size) const;
};

/// Ground-truth placement label: Gaussian in distance to the ground-truth
/// translation with sigma = sigma_scale * subject footprint radius. When
/// `on_anchor` is given, activation is restricted to that object's
/// top-surface points (within 1 cm of its maximum height).
AffordanceMap gt_affordance(const Scene& scene, const Pose& gt_pose, const Vec3& dropped_extent,
                            double sigma_scale = 1.0, const SceneObject* on_anchor = nullptr);

/// Conjunction of per-plan placement constraints: a 90-degree sector around
/// each plan's direction, radially bounded by
/// [r_anchor + r_subject, r_anchor + r_subject + 3*r_subject]; "on" plans
/// use the anchor's top footprint. Boundaries are inclusive.
struct Region {
  struct Constraint {
    bool on = false;
    Vec2 center{0.0, 0.0};
    double angle = 0.0;
    double half_width = 0.0;
    double r_lo = 0.0, r_hi = 0.0;
    std::vector<Vec2> polygon;
  };
  std::vector<Constraint> constraints;
  std::vector<std::size_t> point_indices;
  std::vector<Vec2> outline;

  bool contains(const Vec3& p) const;
};

Region annotate_region(const Scene& scene, const std::vector<StructuredPlan>& plans,
                       const Vec3& subject_extent);

/// Scene JSON I/O. Object clouds are either inline ("points") or referenced
/// PLY files ("points_ply", relative to the scene file). save_scene with a
/// non-empty `ply_dir` writes clouds as PLY files into that directory.
Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path, const std::string& ply_dir = "");

std::vector<StructuredPlan> load_plans(const std::string& path);
void save_plans(const std::vector<StructuredPlan>& plans, const std::string& path);

}  // namespace placekit
