// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "placekit/json_util.hpp"

namespace placekit {

namespace {

constexpr double kSectorHalfWidthClassify = M_PI / 8.0;
constexpr double kSectorHalfWidthRegion = M_PI / 4.0;

struct RelationEntry {
  Relation relation;
  const char* name;
  // Viewer-frame direction angle; NAN for "on".
  double angle;
};

const RelationEntry kRelationTable[kNumRelations] = {
    {Relation::Left, "left", M_PI},
    {Relation::Right, "right", 0.0},
    {Relation::Front, "front", -M_PI / 2.0},
    {Relation::Behind, "behind", M_PI / 2.0},
    {Relation::LeftFront, "left_front", -3.0 * M_PI / 4.0},
    {Relation::LeftBehind, "left_behind", 3.0 * M_PI / 4.0},
    {Relation::RightFront, "right_front", -M_PI / 4.0},
    {Relation::RightBehind, "right_behind", M_PI / 4.0},
    {Relation::On, "on", std::numeric_limits<double>::quiet_NaN()},
};

// Sector index -> relation, index = llround(angle / 45deg) in [-4, 4].
Relation sector_relation(long idx) {
  switch (idx) {
    case 0: return Relation::Right;
    case 1: return Relation::RightBehind;
    case 2: return Relation::Behind;
    case 3: return Relation::LeftBehind;
    case 4: case -4: return Relation::Left;
    case -3: return Relation::LeftFront;
    case -2: return Relation::Front;
    case -1: return Relation::RightFront;
    default: fail("invalid_argument", "sector index out of range");
  }
}

Vec2 viewer_right(double viewer_yaw) { return Vec2(std::cos(viewer_yaw), std::sin(viewer_yaw)); }
Vec2 viewer_behind(double viewer_yaw) { return Vec2(-std::sin(viewer_yaw), std::cos(viewer_yaw)); }

// Viewer-frame angle of a scene-frame horizontal displacement.
double viewer_angle(const Vec2& d, double viewer_yaw) {
  return std::atan2(d.dot(viewer_behind(viewer_yaw)), d.dot(viewer_right(viewer_yaw)));
}

double angular_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

std::string dirname_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

}  // namespace

std::string relation_name(Relation r) {
  for (const auto& e : kRelationTable)
    if (e.relation == r) return e.name;
  fail("invalid_argument", "unknown relation value");
}

Relation relation_from_name(const std::string& name) {
  for (const auto& e : kRelationTable)
    if (name == e.name) return e.relation;
  fail("schema_error", "unknown relation name '" + name + "'");
}

const std::vector<Relation>& all_relations() {
  static const std::vector<Relation> all = [] {
    std::vector<Relation> v;
    for (const auto& e : kRelationTable) v.push_back(e.relation);
    return v;
  }();
  return all;
}

std::optional<double> relation_angle(Relation r) {
  for (const auto& e : kRelationTable)
    if (e.relation == r) return std::isnan(e.angle) ? std::nullopt : std::optional<double>(e.angle);
  fail("invalid_argument", "unknown relation value");
}

Vec2 relation_unit(Relation r, double viewer_yaw) {
  const auto angle = relation_angle(r);
  if (!angle) fail("invalid_argument", "relation 'on' has no planar direction");
  return std::cos(*angle) * viewer_right(viewer_yaw) + std::sin(*angle) * viewer_behind(viewer_yaw);
}

ScenePose ScenePose::from_quat(const Vec3& translation, const Eigen::Quaterniond& q) {
  ScenePose out;
  out.t = translation;
  out.quat = q;
  out.validate();
  return out;
}

void ScenePose::validate() const {
  if (!t.allFinite()) fail("invalid_argument", "pose translation is not finite");
  if (quat && std::abs(quat->norm() - 1.0) > 1e-9)
    fail("invalid_argument", "pose quaternion is not unit norm");
}

Vec3 ScenePose::apply(const Vec3& p) const {
  if (quat) return *quat * p + t;
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * p.x() - s * p.y() + t.x(), s * p.x() + c * p.y() + t.y(), p.z() + t.z());
}

double ScenePose::yaw_value() const {
  if (!quat) return yaw;
  const Vec3 x = *quat * Vec3::UnitX();
  if (std::hypot(x.x(), x.y()) < 1e-12) return 0.0;
  return std::atan2(x.y(), x.x());
}

PointCloud SceneObject::world_points() const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const Vec3& p : points.points) out.points.push_back(pose.apply(p));
  out.activations = points.activations;
  return out;
}

void SceneObject::validate() const {
  if (category.empty()) fail("invalid_argument", "object category must be non-empty");
  points.require_valid("object " + std::to_string(id));
  pose.validate();
  if (!(extent.x() > 0.0 && extent.y() > 0.0 && extent.z() > 0.0))
    fail("invalid_argument", "object " + std::to_string(id) + ": extent must be positive");
}

double Scene::viewer_yaw() const { return camera ? camera->pose.yaw_value() : 0.0; }

double Scene::support_height() const { return receptacle.world_footprint().zmax; }

const SceneObject* Scene::find(int id) const {
  if (receptacle.id == id) return &receptacle;
  for (const SceneObject& obj : objects)
    if (obj.id == id) return &obj;
  return nullptr;
}

std::vector<Scene::CloudSegment> Scene::cloud_layout() const {
  std::vector<const SceneObject*> ordered;
  for (const SceneObject& obj : objects) ordered.push_back(&obj);
  std::sort(ordered.begin(), ordered.end(),
            [](const SceneObject* a, const SceneObject* b) { return a->id < b->id; });
  std::vector<CloudSegment> layout;
  std::size_t offset = 0;
  layout.push_back({receptacle.id, 0, receptacle.points.size()});
  offset += receptacle.points.size();
  for (const SceneObject* obj : ordered) {
    layout.push_back({obj->id, offset, obj->points.size()});
    offset += obj->points.size();
  }
  return layout;
}

PointCloud Scene::scene_cloud() const {
  PointCloud cloud;
  for (const CloudSegment& seg : cloud_layout()) {
    const SceneObject* obj = find(seg.object_id);
    const PointCloud world = obj->world_points();
    cloud.points.insert(cloud.points.end(), world.points.begin(), world.points.end());
  }
  return cloud;
}

void Scene::validate() const {
  receptacle.validate();
  std::map<int, bool> seen;
  seen[receptacle.id] = true;
  for (const SceneObject& obj : objects) {
    obj.validate();
    if (seen.count(obj.id))
      fail("invalid_argument", "duplicate object id " + std::to_string(obj.id));
    seen[obj.id] = true;
  }
  if (std::abs(gravity.norm() - 1.0) > 1e-9)
    fail("invalid_argument", "gravity must be a unit vector");
  const double support = support_height();
  std::vector<Footprint> fps;
  fps.reserve(objects.size());
  for (const SceneObject& obj : objects) fps.push_back(obj.world_footprint());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (std::abs(fps[i].zmin - support) <= kRestTolerance) continue;
    bool stacked = false;
    const Vec2 center = fps[i].center();
    for (std::size_t j = 0; j < objects.size() && !stacked; ++j) {
      if (i == j) continue;
      stacked = fps[j].contains_xy(center) && std::abs(fps[i].zmin - fps[j].zmax) <= kStackTolerance;
    }
    if (!stacked)
      fail("invalid_argument",
           "object " + std::to_string(objects[i].id) + " is neither resting nor stacked");
  }
}

double support_height_at(const Scene& scene, const Vec2& xy) {
  double z = scene.support_height();
  for (const SceneObject& obj : scene.objects) {
    const Footprint fp = obj.world_footprint();
    if (fp.contains_xy(xy)) z = std::max(z, fp.zmax);
  }
  return z;
}

Relation classify_relation(const SceneObject& anchor, const SceneObject& subject,
                           double viewer_yaw) {
  const Footprint anchor_fp = anchor.world_footprint();
  const Footprint subject_fp = subject.world_footprint();
  const Vec2 subject_center = subject_fp.center();
  if (anchor_fp.contains_xy(subject_center) &&
      std::abs(subject_fp.zmin - anchor_fp.zmax) <= kStackTolerance)
    return Relation::On;
  const Vec2 d = subject_center - anchor_fp.center();
  if (d.norm() < kAmbiguityThreshold)
    fail("ambiguous_relation", "objects " + std::to_string(anchor.id) + " and " +
                                   std::to_string(subject.id) + " are horizontally coincident");
  const double angle = viewer_angle(d, viewer_yaw);
  return sector_relation(std::llround(angle / kSectorHalfWidthClassify / 2.0));
}

Relation classify_displacement(const Vec3& anchor_centroid, const Vec3& subject_centroid,
                               double viewer_yaw) {
  const Vec2 d(subject_centroid.x() - anchor_centroid.x(),
               subject_centroid.y() - anchor_centroid.y());
  if (d.norm() < kAmbiguityThreshold) {
    if (std::abs(subject_centroid.z() - anchor_centroid.z()) >= kAmbiguityThreshold)
      return Relation::On;
    return Relation::Right;
  }
  const double angle = viewer_angle(d, viewer_yaw);
  return sector_relation(std::llround(angle / kSectorHalfWidthClassify / 2.0));
}

void AffordanceMap::validate(std::size_t expected_size) const {
  if (activations.size() != expected_size)
    fail("invalid_argument", "affordance map is not aligned with the scene cloud");
  for (double a : activations)
    if (!(a >= 0.0 && a <= 1.0)) fail("invalid_argument", "affordance activation outside [0,1]");
}

AffordanceMap gt_affordance(const Scene& scene, const Pose& gt_pose, const Vec3& dropped_extent,
                            double sigma_scale, const SceneObject* on_anchor) {
  const double support = scene.support_height();
  if (gt_pose.t.z() < support - 1e-6)
    fail("invalid_argument", "gt_affordance: pose is below the receptacle support");
  const double sigma = sigma_scale * footprint_radius(dropped_extent);
  if (!(sigma > 0.0)) fail("invalid_argument", "gt_affordance: sigma must be positive");
  const PointCloud cloud = scene.scene_cloud();
  AffordanceMap map;
  map.reference = "scene";
  map.activations.resize(cloud.size(), 0.0);
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const double d2 = (cloud.points[j] - gt_pose.t).squaredNorm();
    map.activations[j] = std::exp(-d2 / (2.0 * sigma * sigma));
  }
  if (on_anchor != nullptr) {
    const Footprint anchor_fp = on_anchor->world_footprint();
    const auto layout = scene.cloud_layout();
    const PointCloud anchor_world = on_anchor->world_points();
    std::size_t start = 0, count = 0;
    for (const auto& seg : layout)
      if (seg.object_id == on_anchor->id) {
        start = seg.start;
        count = seg.count;
      }
    std::vector<double> masked(cloud.size(), 0.0);
    for (std::size_t j = 0; j < count; ++j)
      if (anchor_world.points[j].z() >= anchor_fp.zmax - kTopSurfaceBand)
        masked[start + j] = map.activations[start + j];
    map.activations = std::move(masked);
  }
  return map;
}

bool Region::contains(const Vec3& p) const {
  const Vec2 xy(p.x(), p.y());
  for (const Constraint& c : constraints) {
    if (c.on) {
      Footprint fp;
      fp.hull = c.polygon;
      fp.zmin = 0.0;
      fp.zmax = 1.0;
      if (!fp.contains_xy(xy)) return false;
      continue;
    }
    const Vec2 d = xy - c.center;
    const double r = d.norm();
    if (r < c.r_lo - 1e-12 || r > c.r_hi + 1e-12) return false;
    if (r < 1e-12) return false;
    if (angular_distance(std::atan2(d.y(), d.x()), c.angle) > c.half_width + 1e-12) return false;
  }
  return !constraints.empty();
}

Region annotate_region(const Scene& scene, const std::vector<StructuredPlan>& plans,
                       const Vec3& subject_extent) {
  if (plans.empty()) fail("invalid_argument", "annotate_region: plans must be non-empty");
  const double r_subject = footprint_radius(subject_extent);
  const double viewer_yaw = scene.viewer_yaw();
  Region region;
  for (const StructuredPlan& plan : plans) {
    const SceneObject* anchor = scene.find(plan.anchor_id);
    if (anchor == nullptr || anchor->id == scene.receptacle.id)
      fail("unresolvable_anchor",
           "annotate_region: anchor id " + std::to_string(plan.anchor_id) + " not in scene");
    Region::Constraint c;
    if (plan.direction == Relation::On) {
      c.on = true;
      const PointCloud world = anchor->world_points();
      const Footprint fp = Footprint::of(world.points);
      std::vector<Vec2> top;
      for (const Vec3& p : world.points)
        if (p.z() >= fp.zmax - kTopSurfaceBand) top.emplace_back(p.x(), p.y());
      c.polygon = convex_hull_2d(std::move(top));
      if (c.polygon.size() < 3)
        fail("infeasible_plan_set", "annotate_region: anchor top surface is degenerate");
    } else {
      const Footprint fp = anchor->world_footprint();
      c.center = fp.center();
      const double r_anchor = footprint_radius(anchor->extent);
      // The direction angle lives in the viewer frame; store it in the scene
      // frame so containment tests stay frame-free.
      c.angle = *relation_angle(plan.direction) + viewer_yaw;
      c.half_width = kSectorHalfWidthRegion;
      c.r_lo = r_anchor + r_subject;
      c.r_hi = c.r_lo + 3.0 * r_subject;
    }
    region.constraints.push_back(std::move(c));
  }

  // Feasibility: probe a grid of candidate locations drawn from each
  // constraint; the intersection is declared empty when no probe lands in it.
  bool feasible = false;
  for (const Region::Constraint& c : region.constraints) {
    std::vector<Vec2> probes;
    if (c.on) {
      Vec2 lo = c.polygon[0], hi = c.polygon[0];
      for (const Vec2& v : c.polygon) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
      for (int i = 0; i <= 12; ++i)
        for (int j = 0; j <= 12; ++j)
          probes.emplace_back(lo.x() + (hi.x() - lo.x()) * i / 12.0,
                              lo.y() + (hi.y() - lo.y()) * j / 12.0);
    } else {
      for (int i = 0; i <= 60; ++i) {
        const double a = c.angle - c.half_width + 2.0 * c.half_width * i / 60.0;
        for (int j = 0; j <= 10; ++j) {
          const double r = c.r_lo + (c.r_hi - c.r_lo) * j / 10.0;
          probes.emplace_back(c.center + r * Vec2(std::cos(a), std::sin(a)));
        }
      }
    }
    for (const Vec2& p : probes)
      if (region.contains(Vec3(p.x(), p.y(), 0.0))) {
        feasible = true;
        break;
      }
    if (feasible) break;
  }
  if (!feasible) fail("infeasible_plan_set", "annotate_region: plan constraints have empty intersection");

  const PointCloud cloud = scene.scene_cloud();
  for (std::size_t j = 0; j < cloud.size(); ++j)
    if (region.contains(cloud.points[j])) region.point_indices.push_back(j);

  const Region::Constraint& first = region.constraints.front();
  if (first.on) {
    region.outline = first.polygon;
  } else {
    for (int i = 0; i <= 24; ++i)
      region.outline.push_back(first.center +
                               first.r_hi * Vec2(std::cos(first.angle - first.half_width +
                                                          2.0 * first.half_width * i / 24.0),
                                                 std::sin(first.angle - first.half_width +
                                                          2.0 * first.half_width * i / 24.0)));
    for (int i = 24; i >= 0; --i)
      region.outline.push_back(first.center +
                               first.r_lo * Vec2(std::cos(first.angle - first.half_width +
                                                          2.0 * first.half_width * i / 24.0),
                                                 std::sin(first.angle - first.half_width +
                                                          2.0 * first.half_width * i / 24.0)));
  }
  return region;
}

namespace detail {

json pose_json(const ScenePose& pose) {
  json j;
  j["t"] = vec3_json(pose.t);
  if (pose.quat) {
    j["quat"] = json::array({pose.quat->w(), pose.quat->x(), pose.quat->y(), pose.quat->z()});
  } else {
    j["yaw"] = pose.yaw;
  }
  return j;
}

ScenePose pose_from_json(const json& j, const std::string& context) {
  check_keys(j, {"t"}, {"yaw", "quat"}, context);
  const Vec3 t = vec3_from(j.at("t"), context + ".t");
  if (j.contains("quat")) {
    if (j.contains("yaw")) fail("schema_error", context + ": pose has both yaw and quat");
    const json& q = j.at("quat");
    if (!q.is_array() || q.size() != 4) fail("schema_error", context + ".quat: expected 4 values");
    return ScenePose::from_quat(
        t, Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                              q.at(3).get<double>()));
  }
  if (!j.contains("yaw")) fail("schema_error", context + ": pose needs yaw or quat");
  return ScenePose(t, j.at("yaw").get<double>());
}

json object_json(const SceneObject& obj, const std::string& ply_dir, const std::string& ply_ref,
                 const std::string& ply_name) {
  json j;
  j["id"] = obj.id;
  j["category"] = obj.category;
  j["pose"] = pose_json(obj.pose);
  j["extent"] = vec3_json(obj.extent);
  if (ply_dir.empty()) {
    json pts = json::array();
    for (const Vec3& p : obj.points.points) pts.push_back(vec3_json(p));
    j["points"] = std::move(pts);
  } else {
    write_ply(ply_dir + "/" + ply_name, obj.points);
    j["points_ply"] = ply_ref + ply_name;
  }
  return j;
}

// Reference prefix that resolves from the scene file's directory to ply_dir.
std::string ply_ref_prefix(const std::string& scene_path, const std::string& ply_dir) {
  if (ply_dir.empty()) return "";
  namespace fs = std::filesystem;
  const fs::path scene_dir = fs::absolute(fs::path(scene_path)).parent_path();
  const fs::path rel = fs::absolute(fs::path(ply_dir)).lexically_relative(scene_dir);
  if (rel.empty() || rel == ".") return "";
  return rel.generic_string() + "/";
}

SceneObject object_from_json(const json& j, const std::string& base_dir,
                             const std::string& context) {
  check_keys(j, {"id", "category", "pose", "extent"}, {"points", "points_ply"}, context);
  SceneObject obj;
  obj.id = j.at("id").get<int>();
  obj.category = j.at("category").get<std::string>();
  obj.pose = pose_from_json(j.at("pose"), context + ".pose");
  obj.extent = vec3_from(j.at("extent"), context + ".extent");
  if (j.contains("points") == j.contains("points_ply"))
    fail("schema_error", context + ": exactly one of points/points_ply is required");
  if (j.contains("points")) {
    for (const json& p : j.at("points")) obj.points.points.push_back(vec3_from(p, context + ".points"));
  } else {
    obj.points = read_ply(base_dir + j.at("points_ply").get<std::string>());
  }
  obj.validate();
  return obj;
}

}  // namespace detail

using detail::object_from_json;
using detail::object_json;
using detail::pose_from_json;
using detail::pose_json;

Scene load_scene(const std::string& path) {
  const json j = load_json_file(path, "load_scene");
  check_keys(j, {"schema_version", "gravity", "receptacle", "objects"}, {"camera"}, "scene");
  check_schema_version(j, 1, "scene");
  const std::string base_dir = dirname_of(path);
  Scene scene;
  scene.gravity = vec3_from(j.at("gravity"), "scene.gravity");
  if (j.contains("camera")) {
    const json& cj = j.at("camera");
    check_keys(cj, {"intrinsics", "pose"}, {}, "scene.camera");
    const json& ij = cj.at("intrinsics");
    check_keys(ij, {"fx", "fy", "cx", "cy", "width", "height"}, {}, "scene.camera.intrinsics");
    Camera cam;
    cam.intrinsics.fx = ij.at("fx").get<double>();
    cam.intrinsics.fy = ij.at("fy").get<double>();
    cam.intrinsics.cx = ij.at("cx").get<double>();
    cam.intrinsics.cy = ij.at("cy").get<double>();
    cam.intrinsics.width = ij.at("width").get<int>();
    cam.intrinsics.height = ij.at("height").get<int>();
    cam.intrinsics.validate();
    cam.pose = pose_from_json(cj.at("pose"), "scene.camera.pose");
    scene.camera = std::move(cam);
  }
  scene.receptacle = object_from_json(j.at("receptacle"), base_dir, "scene.receptacle");
  for (const json& oj : j.at("objects"))
    scene.objects.push_back(object_from_json(oj, base_dir, "scene.objects"));
  scene.validate();
  return scene;
}

void save_scene(const Scene& scene, const std::string& path, const std::string& ply_dir) {
  if (!ply_dir.empty()) std::filesystem::create_directories(ply_dir);
  json j;
  j["schema_version"] = 1;
  j["gravity"] = vec3_json(scene.gravity);
  if (scene.camera) {
    json cj;
    json ij;
    ij["fx"] = scene.camera->intrinsics.fx;
    ij["fy"] = scene.camera->intrinsics.fy;
    ij["cx"] = scene.camera->intrinsics.cx;
    ij["cy"] = scene.camera->intrinsics.cy;
    ij["width"] = scene.camera->intrinsics.width;
    ij["height"] = scene.camera->intrinsics.height;
    cj["intrinsics"] = std::move(ij);
    cj["pose"] = pose_json(scene.camera->pose);
    j["camera"] = std::move(cj);
  }
  const std::string ply_ref = detail::ply_ref_prefix(path, ply_dir);
  j["receptacle"] = object_json(scene.receptacle, ply_dir, ply_ref, "receptacle.ply");
  json objs = json::array();
  std::vector<const SceneObject*> ordered;
  for (const SceneObject& obj : scene.objects) ordered.push_back(&obj);
  std::sort(ordered.begin(), ordered.end(),
            [](const SceneObject* a, const SceneObject* b) { return a->id < b->id; });
  for (const SceneObject* obj : ordered)
    objs.push_back(object_json(*obj, ply_dir, ply_ref, "object_" + std::to_string(obj->id) + ".ply"));
  j["objects"] = std::move(objs);
  save_json_file(j, path, "save_scene");
}

std::vector<StructuredPlan> load_plans(const std::string& path) {
  const json j = load_json_file(path, "load_plans");
  check_keys(j, {"schema_version", "plans"}, {}, "plans");
  check_schema_version(j, 1, "plans");
  std::vector<StructuredPlan> plans;
  for (const json& pj : j.at("plans")) {
    check_keys(pj, {"anchor_id", "anchor_category", "anchor_position", "direction"},
               {"anchor_bbox_2d"}, "plan");
    StructuredPlan plan;
    plan.anchor_id = pj.at("anchor_id").get<int>();
    plan.anchor_category = pj.at("anchor_category").get<std::string>();
    plan.anchor_position = vec3_from(pj.at("anchor_position"), "plan.anchor_position");
    plan.direction = relation_from_name(pj.at("direction").get<std::string>());
    if (pj.contains("anchor_bbox_2d")) {
      const json& b = pj.at("anchor_bbox_2d");
      if (!b.is_array() || b.size() != 4) fail("schema_error", "plan.anchor_bbox_2d: expected 4 values");
      plan.anchor_bbox_2d = Eigen::Vector4d(b.at(0).get<double>(), b.at(1).get<double>(),
                                            b.at(2).get<double>(), b.at(3).get<double>());
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

void save_plans(const std::vector<StructuredPlan>& plans, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  json arr = json::array();
  for (const StructuredPlan& plan : plans) {
    json pj;
    pj["anchor_id"] = plan.anchor_id;
    pj["anchor_category"] = plan.anchor_category;
    pj["anchor_position"] = vec3_json(plan.anchor_position);
    pj["direction"] = relation_name(plan.direction);
    if (plan.anchor_bbox_2d) {
      const auto& b = *plan.anchor_bbox_2d;
      pj["anchor_bbox_2d"] = json::array({b[0], b[1], b[2], b[3]});
    }
    arr.push_back(std::move(pj));
  }
  j["plans"] = std::move(arr);
  save_json_file(j, path, "save_plans");
}

}  // namespace placekit
