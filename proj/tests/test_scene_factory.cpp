// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <vector>

#include "placekit/scene_factory.hpp"

using namespace placekit;

namespace {

std::string data_dir() {
  const char* env = std::getenv("PLACEKIT_DATA");
  return env != nullptr ? env : "data";
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "placekit_scene_factory_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

GraphNode node(int id, const std::string& category, double x, double y, double z) {
  GraphNode n;
  n.id = id;
  n.category = category;
  n.centroid = Vec3(x, y, z);
  return n;
}

}  // namespace

TEST_CASE("shape library covers the similarity catalog and validates lookups") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  const SimilarityTable table = SimilarityTable::builtin();
  for (const std::string& cat : table.categories()) CHECK(lib.has(cat));
  CHECK_FALSE(lib.has("spaceship"));
  CHECK_THROWS_AS(lib.entry("spaceship"), Error);
  CHECK_THROWS_AS(lib.sample_extent("spaceship", 0), Error);
  CHECK(lib.categories().size() == table.categories().size());
}

TEST_CASE("procedural objects sit at the origin with extents equal to their aabb") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  RandomStream rng(17);
  for (const std::string& cat : lib.categories()) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::uint64_t seed = rng.next_u64();
      const SceneObject obj = lib.make_object(cat, 3, seed);
      CHECK(obj.id == 3);
      CHECK(obj.category == cat);
      CHECK(obj.points.size() >= 50);
      CHECK(obj.pose.t == Vec3::Zero());
      CHECK(obj.pose.yaw == 0.0);
      const auto [lo, hi] = obj.points.aabb();
      CHECK(lo.z() == 0.0);  // base exactly on the ground plane
      CHECK(std::abs(lo.x() + hi.x()) < 1e-12);  // horizontally centered
      CHECK(std::abs(lo.y() + hi.y()) < 1e-12);
      CHECK((obj.extent - (hi - lo)).norm() == 0.0);  // extent is the exact aabb
      // Pre-planned extents match the realized object for the same seed.
      CHECK(lib.sample_extent(cat, seed) == obj.extent);
      // Determinism: same seed, same cloud.
      const SceneObject again = lib.make_object(cat, 3, seed);
      REQUIRE(again.points.size() == obj.points.size());
      for (std::size_t i = 0; i < obj.points.size(); ++i)
        CHECK(again.points.points[i] == obj.points.points[i]);
    }
  }
  // Elongated shapes are dealt a random quarter turn: both orientations of a
  // knife appear across seeds (extent components swap).
  int along_x = 0, along_y = 0;
  for (int i = 0; i < 40; ++i) {
    const Vec3 e = lib.sample_extent("knife", 1000 + i);
    (e.x() > e.y() ? along_x : along_y)++;
  }
  CHECK(along_x > 0);
  CHECK(along_y > 0);
  // Round-based categories keep equal horizontal extents in every orientation.
  for (int i = 0; i < 10; ++i) {
    const Vec3 e = lib.sample_extent("bottle", 2000 + i);
    CHECK(e.x() == e.y());
  }
}

TEST_CASE("instantiation places nodes at centroids with bases snapped to supports") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  std::vector<GraphNode> nodes = {node(0, "plate", 0.2, 0.0, 0.05),
                                  node(1, "mug", -0.2, 0.0, 0.05),
                                  node(2, "bowl", 0.2, 0.0, 0.15)};
  const SceneGraph graph = build_graph(nodes, 0.0);
  // The stacked bowl shares the plate's column, so its edge is "on".
  bool has_on = false;
  for (const GraphEdge& e : graph.edges) has_on |= e.relation == Relation::On;
  CHECK(has_on);

  const Vec3 receptacle_extent(0.9, 0.7, 0.04);
  const Scene scene = instantiate(graph, lib, receptacle_extent, 99);
  scene.validate();
  REQUIRE(scene.objects.size() == 3);
  CHECK(scene.receptacle.extent == receptacle_extent);  // everything already fits
  const double support = scene.support_height();
  CHECK(support == 0.0);  // the receptacle top defines the z = 0 plane

  const SceneObject* plate = nullptr;
  const SceneObject* mug = nullptr;
  const SceneObject* bowl = nullptr;
  for (const SceneObject& obj : scene.objects) {
    if (obj.category == "plate") plate = &obj;
    if (obj.category == "mug") mug = &obj;
    if (obj.category == "bowl") bowl = &obj;
  }
  REQUIRE(plate != nullptr);
  REQUIRE(mug != nullptr);
  REQUIRE(bowl != nullptr);
  CHECK(plate->pose.t.x() == doctest::Approx(0.2));
  CHECK(mug->pose.t.x() == doctest::Approx(-0.2));
  CHECK(plate->pose.t.z() == doctest::Approx(support));
  CHECK(mug->pose.t.z() == doctest::Approx(support));
  // The bowl rests exactly on the plate's top.
  CHECK(bowl->pose.t.z() == doctest::Approx(support + plate->extent.z()));
  CHECK(support_of(scene, *bowl) == scene.find(plate->id));
  CHECK(support_of(scene, *mug) == nullptr);
  const std::vector<int> on_plate = stacked_on(scene, *plate);
  REQUIRE(on_plate.size() == 1);
  CHECK(on_plate[0] == bowl->id);

  // Same seed reproduces the scene exactly.
  const Scene again = instantiate(graph, lib, receptacle_extent, 99);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    CHECK(again.objects[i].pose.t == scene.objects[i].pose.t);
    REQUIRE(again.objects[i].points.size() == scene.objects[i].points.size());
    for (std::size_t j = 0; j < scene.objects[i].points.size(); ++j)
      CHECK(again.objects[i].points.points[j] == scene.objects[i].points.points[j]);
  }

  // A node outside the receptacle is rejected up front.
  std::vector<GraphNode> outside = {node(0, "plate", 0.2, 0.0, 0.05),
                                    node(1, "mug", 0.47, 0.0, 0.05)};
  CHECK_THROWS_AS(instantiate(build_graph(outside, 0.0), lib, receptacle_extent, 99), Error);
  try {
    instantiate(build_graph(outside, 0.0), lib, receptacle_extent, 99);
  } catch (const Error& e) {
    CHECK(e.kind() == "infeasible_scene");
  }

  // A node near the rim fits only because the receptacle grows to cover it.
  std::vector<GraphNode> rim = {node(0, "plate", 0.0, 0.0, 0.05),
                                node(1, "mug", 0.44, 0.0, 0.05)};
  const Scene grown = instantiate(build_graph(rim, 0.0), lib, receptacle_extent, 99);
  const SceneObject* rim_mug = nullptr;
  for (const SceneObject& obj : grown.objects)
    if (obj.category == "mug") rim_mug = &obj;
  REQUIRE(rim_mug != nullptr);
  CHECK(grown.receptacle.extent.x() / 2 >=
        std::abs(rim_mug->pose.t.x()) + rim_mug->extent.x() / 2 + 0.02 - 1e-12);
}

TEST_CASE("penetration measures agree with footprint prism overlap") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  SceneObject a = lib.make_object("bowl", 1, 5);
  SceneObject b = lib.make_object("bowl", 2, 6);
  a.pose = ScenePose(Vec3(0, 0, 0), 0.0);
  b.pose = ScenePose(Vec3(0.05, 0, 0), 0.0);
  const double pen = object_penetration(a, b);
  CHECK(pen == prism_penetration(a.world_footprint(), b.world_footprint()));
  CHECK(pen > 0.0);
  b.pose.t.x() = 1.0;
  CHECK(object_penetration(a, b) == 0.0);

  Scene scene;
  scene.receptacle = lib.make_object("notebook", 0, 1);  // any flat slab works
  scene.receptacle.extent = Vec3(2, 2, 0.04);
  scene.objects = {a, b};
  CHECK(max_scene_penetration(scene) == 0.0);
  scene.objects[1].pose.t.x() = 0.05;
  CHECK(max_scene_penetration(scene) ==
        object_penetration(scene.objects[0], scene.objects[1]));
}

TEST_CASE("refinement separates light overlaps and removes hopeless ones") {
  const ShapeLibrary lib = ShapeLibrary::builtin();
  // Two cups two centimeters apart: a small overlap the gradient can resolve.
  std::vector<GraphNode> nodes = {node(0, "cup", -0.02, 0.0, 0.05), node(1, "cup", 0.02, 0.0, 0.05),
                                  node(2, "bowl", 0.35, 0.0, 0.05)};
  const Scene scene = instantiate(build_graph(nodes, 0.0), lib, Vec3(0.9, 0.7, 0.04), 3);
  CHECK(max_scene_penetration(scene) > kPenetrationEps);

  RefineTrace trace;
  const RefineResult result = refine_poses(scene, 10, 0.01, 10.0, &trace);
  result.scene.validate();
  CHECK(max_scene_penetration(result.scene) <= kPenetrationEps);
  CHECK(result.removed_ids.empty());  // resolvable without dropping anything
  CHECK_FALSE(trace.steps.empty());
  std::set<int> ids;
  for (const SceneObject& obj : scene.objects) ids.insert(obj.id);
  for (const RefineTrace::Step& step : trace.steps) {
    CHECK(ids.count(step.object_id) == 1);
    // Accepted steps never increase the mover's penetration.
    if (step.accepted) CHECK(step.penetration_after <= step.penetration_before + 1e-12);
  }
  // The bystander bowl was never touched.
  const SceneObject* bowl_before = nullptr;
  const SceneObject* bowl_after = nullptr;
  for (const SceneObject& obj : scene.objects)
    if (obj.category == "bowl") bowl_before = &obj;
  for (const SceneObject& obj : result.scene.objects)
    if (obj.category == "bowl") bowl_after = &obj;
  REQUIRE(bowl_before != nullptr);
  REQUIRE(bowl_after != nullptr);
  CHECK(bowl_after->pose.t == bowl_before->pose.t);

  // Determinism.
  const RefineResult rerun = refine_poses(scene, 10, 0.01, 10.0);
  for (std::size_t i = 0; i < result.scene.objects.size(); ++i)
    CHECK(rerun.scene.objects[i].pose.t == result.scene.objects[i].pose.t);

  // Perfectly coincident objects cannot be separated in one step: the loser
  // is removed and the survivor satisfies the guarantee.
  std::vector<GraphNode> hopeless = {node(0, "cup", 0.0, 0.0, 0.05),
                                     node(1, "cup", 0.0005, 0.0, 0.05)};
  const Scene stuck = instantiate(build_graph(hopeless, 0.0), lib, Vec3(0.9, 0.7, 0.04), 3);
  const RefineResult culled = refine_poses(stuck, 1, 0.001, 10.0);
  CHECK(max_scene_penetration(culled.scene) <= kPenetrationEps);
  CHECK_FALSE(culled.removed_ids.empty());
  CHECK(culled.scene.objects.size() + culled.removed_ids.size() == stuck.objects.size());

  CHECK_THROWS_AS(refine_poses(scene, 0, 0.01, 10.0), Error);
  CHECK_THROWS_AS(refine_poses(scene, 10, 0.0, 10.0), Error);
  CHECK_THROWS_AS(refine_poses(scene, 10, 0.01, -1.0), Error);
}

TEST_CASE("labeled samples satisfy their own plans and round trip to disk") {
  const Scene scene = load_scene(data_dir() + "/demo_scenes/dining_place_setting.json");
  scene.validate();
  const LabeledSample sample = make_sample(scene, 1, 42);

  CHECK(sample.scene.objects.size() == scene.objects.size() - 1);
  CHECK(sample.scene.find(sample.dropped_object.id) == nullptr);
  const SceneObject* original = scene.find(sample.dropped_object.id);
  REQUIRE(original != nullptr);
  CHECK(sample.gt_pose.t == original->pose.as_pose().t);
  CHECK(sample.gt_pose.yaw == original->pose.as_pose().yaw);

  REQUIRE(sample.plans.size() == 1);
  for (const StructuredPlan& plan : sample.plans) {
    const SceneObject* anchor = sample.scene.find(plan.anchor_id);
    REQUIRE(anchor != nullptr);
    CHECK(plan.anchor_category == anchor->category);
    CHECK(plan.direction == classify_relation(*anchor, *original, scene.viewer_yaw()));
  }
  // The ground truth satisfies the region its own plans induce.
  const Region region =
      annotate_region(sample.scene, sample.plans, sample.dropped_object.extent);
  CHECK(region.contains(sample.gt_pose.t));

  // The label map is the ground-truth affordance on the remaining scene.
  const PointCloud cloud = sample.scene.scene_cloud();
  sample.gt_map.validate(cloud.size());
  const SceneObject* sup = support_of(scene, *original);
  const SceneObject* on_anchor = sup != nullptr ? sample.scene.find(sup->id) : nullptr;
  const AffordanceMap expect =
      gt_affordance(sample.scene, sample.gt_pose, sample.dropped_object.extent, 1.0, on_anchor);
  CHECK(sample.gt_map.activations == expect.activations);

  // Deterministic under the seed.
  const LabeledSample again = make_sample(scene, 1, 42);
  CHECK(again.dropped_object.id == sample.dropped_object.id);
  REQUIRE(again.plans.size() == sample.plans.size());
  CHECK(again.plans[0].anchor_id == sample.plans[0].anchor_id);

  CHECK_THROWS_AS(make_sample(scene, 0, 42), Error);
  CHECK_THROWS_AS(make_sample(scene, static_cast<int>(scene.objects.size()), 42), Error);

  const auto dir = temp_dir() / "sample";
  save_sample(sample, dir.string());
  const LabeledSample back = load_sample(dir.string());
  CHECK(back.dropped_object.id == sample.dropped_object.id);
  CHECK(back.dropped_object.category == sample.dropped_object.category);
  CHECK(back.dropped_object.extent == sample.dropped_object.extent);
  REQUIRE(back.dropped_object.points.size() == sample.dropped_object.points.size());
  for (std::size_t i = 0; i < sample.dropped_object.points.size(); ++i)
    CHECK(back.dropped_object.points.points[i] == sample.dropped_object.points.points[i]);
  CHECK(back.gt_pose.t == sample.gt_pose.t);
  CHECK(back.gt_pose.yaw == sample.gt_pose.yaw);
  REQUIRE(back.plans.size() == sample.plans.size());
  CHECK(back.plans[0].anchor_id == sample.plans[0].anchor_id);
  CHECK(back.plans[0].direction == sample.plans[0].direction);
  CHECK(back.gt_map.activations == sample.gt_map.activations);
  CHECK(back.scene.objects.size() == sample.scene.objects.size());
  CHECK_THROWS_AS(load_sample((temp_dir() / "nope").string()), Error);
}

TEST_CASE("stacked samples plan 'on' their supporting object") {
  // A scene whose only non-stacked, anchor-rich object is the one on top.
  const ShapeLibrary lib = ShapeLibrary::builtin();
  std::vector<GraphNode> nodes = {node(0, "plate", 0.0, 0.0, 0.05),
                                  node(1, "cup", 0.0, 0.0, 0.15),
                                  node(2, "bowl", 0.4, 0.0, 0.05)};
  const Scene scene = instantiate(build_graph(nodes, 0.0), lib, Vec3(1.2, 0.9, 0.04), 11);
  scene.validate();
  // Find a seed whose draw picks the stacked cup.
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    const LabeledSample sample = make_sample(scene, 1, seed);
    if (sample.dropped_object.category != "cup") continue;
    found = true;
    REQUIRE(sample.plans.size() == 1);
    CHECK(sample.plans[0].direction == Relation::On);
    const SceneObject* anchor = sample.scene.find(sample.plans[0].anchor_id);
    REQUIRE(anchor != nullptr);
    CHECK(anchor->category == "plate");
    const Region region =
        annotate_region(sample.scene, sample.plans, sample.dropped_object.extent);
    CHECK(region.contains(sample.gt_pose.t));
    // The label map lives on the plate's top band only.
    const auto layout = sample.scene.cloud_layout();
    for (const auto& seg : layout) {
      if (seg.object_id == anchor->id) continue;
      for (std::size_t j = seg.start; j < seg.start + seg.count; ++j)
        CHECK(sample.gt_map.activations[j] == 0.0);
    }
  }
  CHECK(found);
}
