// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

// Regenerates the bundled demonstration corpus: a handful of hand-laid-out
// tabletop scenes (the seeds for graph abstraction and augmentation) plus
// the default category similarity table. Usage: gen_demo_data [data_dir]

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "placekit/scene_factory.hpp"
#include "placekit/scene_graph.hpp"
#include "placekit/scene_model.hpp"

namespace {

using namespace placekit;

struct DemoItem {
  std::string category;
  double x = 0.0;
  double y = 0.0;
  int stack_on = -1;  ///< index of the supporting item, -1 = on the table
};

Scene make_demo_scene(const std::string& name, const std::vector<DemoItem>& items,
                      const Vec3& receptacle_extent, double viewer_yaw, std::uint64_t seed) {
  std::vector<GraphNode> nodes;
  nodes.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    GraphNode node;
    node.id = static_cast<int>(i);
    node.category = items[i].category;
    if (items[i].stack_on >= 0) {
      const DemoItem& base = items[static_cast<std::size_t>(items[i].stack_on)];
      node.centroid = Vec3(base.x, base.y, 0.12);  // same axis -> "on" edge
    } else {
      node.centroid = Vec3(items[i].x, items[i].y, 0.05);
    }
    nodes.push_back(node);
  }
  const SceneGraph graph = build_graph(nodes, viewer_yaw);
  Scene scene = instantiate(graph, ShapeLibrary::builtin(), receptacle_extent, seed);
  if (max_scene_penetration(scene) > kPenetrationEps) {
    for (std::size_t i = 0; i < scene.objects.size(); ++i)
      for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
        const double pen = object_penetration(scene.objects[i], scene.objects[j]);
        if (pen > kPenetrationEps)
          std::cerr << name << ": " << scene.objects[i].category << " #" << scene.objects[i].id
                    << " vs " << scene.objects[j].category << " #" << scene.objects[j].id
                    << " penetration " << pen << "\n";
      }
    fail("internal_error", "demo layout collides; adjust the hand positions: " + name);
  }

  Camera camera;
  camera.intrinsics = CameraIntrinsics{600.0, 600.0, 320.0, 240.0, 640, 480};
  camera.pose = ScenePose(Vec3(0.0, -1.2, 0.8), viewer_yaw);
  scene.camera = camera;
  scene.validate();
  return scene;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string data_dir = argc > 1 ? argv[1] : "data";
  const std::string scenes_dir = data_dir + "/demo_scenes";
  std::filesystem::create_directories(scenes_dir);

  try {
    SimilarityTable::builtin().save(data_dir + "/similarity.json");

    const struct {
      const char* name;
      Vec3 receptacle;
      double viewer_yaw;
      std::uint64_t seed;
      std::vector<DemoItem> items;
    } demos[] = {
        // Positions keep every pair clear even when elongated shapes draw
        // their worst-case quarter-turn orientation.
        {"dining_place_setting", Vec3(0.9, 0.7, 0.04), 1.5707963267948966, 101,
         {{"plate", 0.0, 0.0},
          {"bowl", 0.0, 0.0, 0},  // bowl stacked on the plate
          {"fork", -0.28, 0.0},
          {"knife", 0.28, 0.0},
          {"spoon", 0.28, 0.26},
          {"glass", -0.05, 0.30}}},
        {"work_desk", Vec3(1.2, 0.9, 0.04), 1.5707963267948966, 102,
         {{"keyboard", -0.08, -0.20},
          {"mouse", 0.30, -0.20},
          {"notebook", -0.40, 0.22},
          {"pen", -0.15, 0.35},
          {"mug", 0.33, 0.10},
          {"lamp", 0.05, 0.35}}},
        {"coffee_corner", Vec3(0.9, 0.7, 0.04), 0.0, 103,
         {{"saucer", -0.18, 0.0},
          {"cup", -0.18, 0.0, 0},  // cup on its saucer
          {"mug", 0.08, -0.12},
          {"glass", 0.10, 0.15},
          {"vase", 0.33, 0.02}}},
        {"pantry_shelf", Vec3(0.9, 0.7, 0.04), 0.0, 104,
         {{"bottle", -0.32, 0.0},
          {"glass", -0.14, -0.02},
          {"cup", 0.02, 0.10},
          {"bowl", 0.20, -0.04},
          {"plate", 0.28, 0.22}}},
        {"study_table", Vec3(0.9, 0.7, 0.04), 3.141592653589793, 105,
         {{"notebook", 0.0, 0.0},
          {"pen", 0.0, 0.24},
          {"stapler", 0.24, 0.05},
          {"plant", 0.36, 0.26},
          {"mug", -0.24, 0.12},
          {"lamp", -0.30, 0.33}}},
        {"window_sill", Vec3(0.9, 0.7, 0.04), 0.0, 106,
         {{"plant", -0.28, 0.0},
          {"vase", 0.0, 0.06},
          {"lamp", 0.30, 0.0},
          {"notebook", 0.02, -0.24}}},
    };

    for (const auto& demo : demos) {
      const Scene scene = make_demo_scene(demo.name, demo.items, demo.receptacle, demo.viewer_yaw, demo.seed);
      save_scene(scene, scenes_dir + "/" + demo.name + ".json");
      std::cout << "wrote " << scenes_dir << "/" << demo.name << ".json\n";
    }
    std::cout << "wrote " << data_dir << "/similarity.json\n";
  } catch (const std::exception& e) {
    std::cerr << "gen_demo_data: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
