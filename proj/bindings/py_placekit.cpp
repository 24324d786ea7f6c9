// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "placekit/affordance.hpp"
#include "placekit/eval_harness.hpp"
#include "placekit/planner.hpp"
#include "placekit/scene_factory.hpp"
#include "placekit/scene_graph.hpp"
#include "placekit/scene_model.hpp"

namespace py = pybind11;
using namespace placekit;

namespace {

Eigen::MatrixXd cloud_matrix(const PointCloud& cloud) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(cloud.size()), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = cloud.points[i];
  return m;
}

PointCloud cloud_from_matrix(const Eigen::MatrixXd& m, const std::vector<double>& activations) {
  if (m.cols() != 3) throw py::value_error("point matrix must be N x 3");
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) cloud.points.push_back(m.row(i));
  cloud.activations = activations;
  cloud.require_valid("point cloud");
  return cloud;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tabletop placement planning: scene graphs, affordance fields, guided diffusion "
            "placement sampling, synthetic benchmarks, and PA/PP/SR evaluation";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "PlacekitError");

  py::enum_<Relation>(m, "Relation")
      .value("LEFT", Relation::Left)
      .value("RIGHT", Relation::Right)
      .value("FRONT", Relation::Front)
      .value("BEHIND", Relation::Behind)
      .value("LEFT_FRONT", Relation::LeftFront)
      .value("LEFT_BEHIND", Relation::LeftBehind)
      .value("RIGHT_FRONT", Relation::RightFront)
      .value("RIGHT_BEHIND", Relation::RightBehind)
      .value("ON", Relation::On);
  m.def("relation_name", &relation_name);
  m.def("relation_from_name", &relation_from_name);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<const Vec3&, double>(), py::arg("t"), py::arg("yaw"))
      .def_readwrite("t", &Pose::t)
      .def_readwrite("yaw", &Pose::yaw)
      .def("apply", &Pose::apply)
      .def("__repr__", [](const Pose& p) {
        return "Pose(t=[" + fmt_double(p.t.x()) + ", " + fmt_double(p.t.y()) + ", " +
               fmt_double(p.t.z()) + "], yaw=" + fmt_double(p.yaw) + ")";
      });

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init([](const Eigen::MatrixXd& points, const std::vector<double>& activations) {
             return cloud_from_matrix(points, activations);
           }),
           py::arg("points"), py::arg("activations") = std::vector<double>{})
      .def_property_readonly("points", &cloud_matrix)
      .def_readonly("activations", &PointCloud::activations)
      .def("__len__", &PointCloud::size)
      .def("transformed", &PointCloud::transformed);

  py::class_<GraphNode>(m, "GraphNode")
      .def(py::init<>())
      .def(py::init([](int id, const std::string& category, const Vec3& centroid) {
             GraphNode n;
             n.id = id;
             n.category = category;
             n.centroid = centroid;
             return n;
           }),
           py::arg("id"), py::arg("category"), py::arg("centroid"))
      .def_readwrite("id", &GraphNode::id)
      .def_readwrite("category", &GraphNode::category)
      .def_readwrite("centroid", &GraphNode::centroid);

  py::class_<GraphEdge>(m, "GraphEdge")
      .def_readonly("parent", &GraphEdge::parent)
      .def_readonly("child", &GraphEdge::child)
      .def_readonly("relation", &GraphEdge::relation)
      .def_readonly("offset", &GraphEdge::offset);

  py::class_<SceneGraph>(m, "SceneGraph")
      .def_readonly("nodes", &SceneGraph::nodes)
      .def_readonly("edges", &SceneGraph::edges)
      .def_readonly("root", &SceneGraph::root)
      .def_readonly("viewer_yaw", &SceneGraph::viewer_yaw)
      .def("validate", &SceneGraph::validate);
  m.def("build_graph", &build_graph, py::arg("nodes"), py::arg("viewer_yaw") = 0.0);
  m.def("load_graph", &load_graph);
  m.def("save_graph", &save_graph);

  py::class_<SimilarityTable>(m, "SimilarityTable")
      .def_static("builtin", &SimilarityTable::builtin)
      .def_static("load", &SimilarityTable::load)
      .def("save", &SimilarityTable::save)
      .def("score", &SimilarityTable::score)
      .def_property_readonly("categories", &SimilarityTable::categories);
  m.def(
      "crossover",
      [](const SceneGraph& g1, const SceneGraph& g2, std::size_t e1, std::size_t e2, double p_c,
         std::uint64_t seed) { return crossover(g1, g2, e1, e2, p_c, seed); },
      py::arg("g1"), py::arg("g2"), py::arg("e1"), py::arg("e2"), py::arg("p_c") = 1.0,
      py::arg("seed") = 0);
  m.def("mutate", &mutate, py::arg("graph"), py::arg("table"), py::arg("library_categories"),
        py::arg("tau_p") = 0.4, py::arg("p_m") = 0.3, py::arg("seed") = 0);

  py::class_<ScenePose>(m, "ScenePose")
      .def_readonly("t", &ScenePose::t)
      .def("yaw_value", &ScenePose::yaw_value)
      .def("as_pose", &ScenePose::as_pose);

  py::class_<SceneObject>(m, "SceneObject")
      .def_readonly("id", &SceneObject::id)
      .def_readonly("category", &SceneObject::category)
      .def_readonly("points", &SceneObject::points)
      .def_readonly("pose", &SceneObject::pose)
      .def_readonly("extent", &SceneObject::extent)
      .def("world_points", &SceneObject::world_points);

  py::class_<Scene>(m, "Scene")
      .def_readonly("receptacle", &Scene::receptacle)
      .def_readonly("objects", &Scene::objects)
      .def("viewer_yaw", &Scene::viewer_yaw)
      .def("support_height", &Scene::support_height)
      .def("scene_cloud", &Scene::scene_cloud)
      .def("validate", &Scene::validate);
  m.def("load_scene", &load_scene);
  m.def("save_scene", &save_scene, py::arg("scene"), py::arg("path"), py::arg("ply_dir") = "");

  py::class_<StructuredPlan>(m, "StructuredPlan")
      .def(py::init<>())
      .def(py::init([](int anchor_id, const std::string& anchor_category,
                       const Vec3& anchor_position, Relation direction) {
             StructuredPlan p;
             p.anchor_id = anchor_id;
             p.anchor_category = anchor_category;
             p.anchor_position = anchor_position;
             p.direction = direction;
             return p;
           }),
           py::arg("anchor_id"), py::arg("anchor_category"), py::arg("anchor_position"),
           py::arg("direction"))
      .def_readwrite("anchor_id", &StructuredPlan::anchor_id)
      .def_readwrite("anchor_category", &StructuredPlan::anchor_category)
      .def_readwrite("anchor_position", &StructuredPlan::anchor_position)
      .def_readwrite("direction", &StructuredPlan::direction);
  m.def("load_plans", &load_plans);
  m.def("save_plans", &save_plans);

  py::class_<AffordanceMap>(m, "AffordanceMap")
      .def_readonly("activations", &AffordanceMap::activations)
      .def_readonly("reference", &AffordanceMap::reference);
  m.def("plan_affordance", &plan_affordance, py::arg("scene"), py::arg("plan"),
        py::arg("subject_extent"));
  m.def("compose_coarse", &compose_coarse, py::arg("maps"), py::arg("cloud"), py::arg("k") = 2,
        py::arg("top_k") = 0);
  m.def("compose_fine", &compose_fine, py::arg("maps"));
  m.def("high_affordance_points", &high_affordance_points, py::arg("map"), py::arg("cloud"),
        py::arg("threshold_frac") = 0.5);

  py::class_<ShapeLibrary>(m, "ShapeLibrary")
      .def_static("builtin", &ShapeLibrary::builtin)
      .def("categories", &ShapeLibrary::categories)
      .def("sample_extent", &ShapeLibrary::sample_extent)
      .def("make_object", &ShapeLibrary::make_object, py::arg("category"), py::arg("id"),
           py::arg("rng_seed"), py::arg("n_points") = 220);
  m.def("instantiate", &instantiate, py::arg("graph"), py::arg("library"),
        py::arg("receptacle_extent"), py::arg("rng_seed"));
  m.def(
      "refine_poses",
      [](const Scene& scene, int steps, double step_size, double reg_weight) {
        const RefineResult r = refine_poses(scene, steps, step_size, reg_weight);
        return py::make_tuple(r.scene, r.removed_ids);
      },
      py::arg("scene"), py::arg("steps") = 10, py::arg("step_size") = 0.01,
      py::arg("reg_weight") = 10.0);

  py::class_<LabeledSample>(m, "LabeledSample")
      .def_readonly("scene", &LabeledSample::scene)
      .def_readonly("dropped_object", &LabeledSample::dropped_object)
      .def_readonly("gt_pose", &LabeledSample::gt_pose)
      .def_readonly("plans", &LabeledSample::plans)
      .def_readonly("gt_map", &LabeledSample::gt_map);
  m.def("make_sample", &make_sample, py::arg("scene"), py::arg("n_plans") = 1,
        py::arg("rng_seed") = 0);
  m.def("save_sample", &save_sample);
  m.def("load_sample", &load_sample);
  m.def("max_scene_penetration", &max_scene_penetration);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_static("linear", &NoiseSchedule::linear, py::arg("steps") = 50,
                  py::arg("beta_start") = 0.01, py::arg("beta_end") = 0.5)
      .def_readwrite("translation_scale", &NoiseSchedule::translation_scale)
      .def_readwrite("yaw_scale", &NoiseSchedule::yaw_scale)
      .def("steps", &NoiseSchedule::steps)
      .def("alpha_bar", &NoiseSchedule::alpha_bar);

  py::class_<GuidanceConfig>(m, "GuidanceConfig")
      .def(py::init<>())
      .def_readwrite("lambda_afford", &GuidanceConfig::lambda_afford)
      .def_readwrite("lambda_collide", &GuidanceConfig::lambda_collide)
      .def_readwrite("afford_enabled", &GuidanceConfig::afford_enabled)
      .def_readwrite("collide_enabled", &GuidanceConfig::collide_enabled)
      .def_readwrite("threshold_frac", &GuidanceConfig::threshold_frac)
      .def_readwrite("gradient_clamp", &GuidanceConfig::gradient_clamp);

  py::class_<PlannerConfig>(m, "PlannerConfig")
      .def(py::init<>())
      .def_readwrite("schedule", &PlannerConfig::schedule)
      .def_readwrite("guidance", &PlannerConfig::guidance)
      .def_readwrite("sampled_target_count", &PlannerConfig::sampled_target_count)
      .def_readwrite("coarse_clusters", &PlannerConfig::coarse_clusters)
      .def_readwrite("coarse_top_k", &PlannerConfig::coarse_top_k)
      .def_readwrite("tsdf_voxel", &PlannerConfig::tsdf_voxel)
      .def_readwrite("tsdf_truncation", &PlannerConfig::tsdf_truncation)
      .def_readwrite("tsdf_padding", &PlannerConfig::tsdf_padding)
      .def_readwrite("seed", &PlannerConfig::seed);

  py::class_<PlacementCandidate>(m, "PlacementCandidate")
      .def_readonly("pose", &PlacementCandidate::pose)
      .def_readonly("final_cost", &PlacementCandidate::final_cost)
      .def_readonly("cost_afford", &PlacementCandidate::cost_afford)
      .def_readonly("cost_collide", &PlacementCandidate::cost_collide)
      .def_readonly("non_finite_gradient", &PlacementCandidate::non_finite_gradient)
      .def_readonly("infeasible_region", &PlacementCandidate::infeasible_region);
  m.def("plan_placement", &plan_placement, py::arg("scene"), py::arg("plans"),
        py::arg("object_points"), py::arg("n_candidates") = 8,
        py::arg("config") = PlannerConfig{});

  py::enum_<DensityMode>(m, "DensityMode")
      .value("SPARSE", DensityMode::Sparse)
      .value("DENSE", DensityMode::Dense);

  py::class_<BenchmarkSpec>(m, "BenchmarkSpec")
      .def(py::init<>())
      .def_static("syn_easy", &BenchmarkSpec::syn_easy, py::arg("n_scenes"), py::arg("seed"))
      .def_static("syn_hard", &BenchmarkSpec::syn_hard, py::arg("n_scenes"), py::arg("seed"))
      .def_readwrite("split", &BenchmarkSpec::split)
      .def_readwrite("min_objects", &BenchmarkSpec::min_objects)
      .def_readwrite("max_objects", &BenchmarkSpec::max_objects)
      .def_readwrite("density", &BenchmarkSpec::density)
      .def_readwrite("n_scenes", &BenchmarkSpec::n_scenes)
      .def_readwrite("seed", &BenchmarkSpec::seed);
  m.def("gen_benchmark", &gen_benchmark, py::arg("spec"), py::arg("demo_graphs"),
        py::arg("library"));

  py::class_<EvalResult::Case>(m, "EvalCase")
      .def_readonly("index", &EvalResult::Case::index)
      .def_readonly("pa", &EvalResult::Case::pa)
      .def_readonly("pp", &EvalResult::Case::pp)
      .def_readonly("sr", &EvalResult::Case::sr)
      .def_readonly("penetration", &EvalResult::Case::penetration)
      .def_readonly("final_cost", &EvalResult::Case::final_cost)
      .def_readonly("error", &EvalResult::Case::error);
  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("planner_name", &EvalResult::planner_name)
      .def_readonly("cases", &EvalResult::cases)
      .def_readonly("pa_percent", &EvalResult::pa_percent)
      .def_readonly("pp_percent", &EvalResult::pp_percent)
      .def_readonly("sr_percent", &EvalResult::sr_percent);
  m.def("run_eval", &run_eval, py::arg("config"), py::arg("benchmark"),
        py::arg("n_candidates") = 8, py::arg("workers") = 1);
  m.def("eval_pa", &eval_pa, py::arg("placed"), py::arg("sample"), py::arg("subject_extent"));
  m.def("eval_pp", &eval_pp, py::arg("placed"), py::arg("sample"), py::arg("object_points"));
  m.def("save_eval_report", &save_eval_report, py::arg("result"), py::arg("json_path"),
        py::arg("csv_path") = "");
}
