// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "placekit/eval_harness.hpp"
#include "placekit/scene_factory.hpp"
#include "placekit/scene_graph.hpp"

namespace placekit {
namespace {

namespace fs = std::filesystem;

int resolve_workers(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<std::string> list_json_files(const std::string& dir, const std::string& context) {
  if (!fs::is_directory(dir)) fail("io_error", context + ": not a directory: " + dir);
  std::vector<std::string> paths;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::vector<SceneGraph> load_graph_dir(const std::string& dir) {
  std::vector<SceneGraph> graphs;
  for (const std::string& path : list_json_files(dir, "graph corpus"))
    graphs.push_back(load_graph(path));
  if (graphs.empty()) fail("empty_corpus", "no graph JSON files in " + dir);
  return graphs;
}

std::string padded_index(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
  return buf;
}

void cmd_abstract(const std::string& scenes_dir, const std::string& out_dir,
                  const RunConfig& cfg) {
  const std::vector<std::string> paths = list_json_files(scenes_dir, "scene corpus");
  if (paths.empty()) fail("empty_corpus", "no scene JSON files in " + scenes_dir);
  fs::create_directories(out_dir);
  for (const std::string& path : paths) {
    const Scene scene = load_scene(path);
    std::vector<GraphNode> nodes;
    nodes.reserve(scene.objects.size());
    for (const SceneObject& obj : scene.objects) {
      GraphNode node;
      node.id = obj.id;
      node.category = obj.category;
      node.centroid = obj.pose.t + Vec3(0.0, 0.0, obj.extent.z() / 2.0);
      nodes.push_back(node);
    }
    const SceneGraph graph = build_graph(nodes, scene.viewer_yaw());
    const std::string out_path = (fs::path(out_dir) / fs::path(path).filename()).string();
    save_graph(graph, out_path);
    if (cfg.verbose) std::cerr << "abstract: wrote " << out_path << "\n";
  }
}

void cmd_augment(const std::string& graphs_dir, const std::string& out_dir, int n_out,
                 const RunConfig& cfg) {
  if (n_out < 0) fail("invalid_argument", "augment: --n-out must be >= 0");
  fs::create_directories(out_dir);
  if (n_out == 0) return;
  const std::vector<SceneGraph> graphs = load_graph_dir(graphs_dir);
  const SimilarityTable table = SimilarityTable::builtin();
  const std::vector<std::string> categories = ShapeLibrary::builtin().categories();
  for (int i = 0; i < n_out; ++i) {
    const std::uint64_t item_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    RandomStream rng(derive_seed(item_seed, 1));
    const auto ia = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(graphs.size()) - 1));
    const auto ib = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(graphs.size()) - 1));
    SceneGraph g = graphs[ia];
    if (ia != ib) {
      const auto edges = pick_matching_edges(g, graphs[ib], rng);
      if (edges.has_value())
        g = crossover(g, graphs[ib], edges->first, edges->second, cfg.crossover_rate,
                      derive_seed(item_seed, 2))
                .first;
    }
    g = mutate(g, table, categories, cfg.similarity_threshold, cfg.mutation_rate,
               derive_seed(item_seed, 3));
    const std::string out_path =
        (fs::path(out_dir) / (padded_index("aug_", i) + ".json")).string();
    save_graph(g, out_path);
    if (cfg.verbose) std::cerr << "augment: wrote " << out_path << "\n";
  }
}

const char* density_name(DensityMode mode) {
  return mode == DensityMode::Dense ? "dense" : "sparse";
}

void cmd_generate(const std::string& graphs_dir, const std::string& out_dir,
                  const BenchmarkSpec& spec, const RunConfig& cfg) {
  const std::vector<SceneGraph> graphs = load_graph_dir(graphs_dir);
  const std::vector<LabeledSample> samples =
      gen_benchmark(spec, graphs, ShapeLibrary::builtin());
  fs::create_directories(out_dir);
  json scene_names = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string name = padded_index("scene_", static_cast<int>(i));
    save_sample(samples[i], (fs::path(out_dir) / name).string());
    scene_names.push_back(name);
    if (cfg.verbose) std::cerr << "generate: wrote " << name << "\n";
  }
  const json manifest{{"schema_version", 1},
                      {"split", spec.split},
                      {"min_objects", spec.min_objects},
                      {"max_objects", spec.max_objects},
                      {"density", density_name(spec.density)},
                      {"n_scenes", spec.n_scenes},
                      {"seed", spec.seed},
                      {"scenes", scene_names}};
  save_json_file(manifest, (fs::path(out_dir) / "manifest.json").string(), "benchmark manifest");
}

std::vector<LabeledSample> load_benchmark_dir(const std::string& dir) {
  const json manifest =
      load_json_file((fs::path(dir) / "manifest.json").string(), "benchmark manifest");
  check_keys(manifest,
             {"schema_version", "split", "min_objects", "max_objects", "density", "n_scenes",
              "seed", "scenes"},
             {}, "benchmark manifest");
  check_schema_version(manifest, 1, "benchmark manifest");
  std::vector<LabeledSample> samples;
  for (const json& name : manifest["scenes"])
    samples.push_back(load_sample((fs::path(dir) / name.get<std::string>()).string()));
  if (samples.empty()) fail("empty_corpus", "benchmark manifest lists no scenes: " + dir);
  return samples;
}

void cmd_plan(const std::string& scene_path, const std::string& plans_path,
              const std::string& object_ply, const std::string& out_path, const RunConfig& cfg) {
  const Scene scene = load_scene(scene_path);
  const std::vector<StructuredPlan> plans = load_plans(plans_path);
  const PointCloud object_points = read_ply(object_ply);
  PlannerConfig planner = cfg.planner;
  planner.seed = cfg.seed;
  const std::vector<PlacementCandidate> candidates =
      plan_placement(scene, plans, object_points, cfg.n_candidates, planner);
  json out_candidates = json::array();
  for (const PlacementCandidate& cand : candidates) {
    out_candidates.push_back(
        json{{"t", vec3_json(cand.pose.t)},
             {"yaw", cand.pose.yaw},
             {"final_cost", cand.final_cost},
             {"cost_afford", cand.cost_afford},
             {"cost_collide", cand.cost_collide},
             {"diagnostics",
              json{{"non_finite_gradient", cand.non_finite_gradient},
                   {"infeasible_region", cand.infeasible_region}}}});
  }
  const json result{{"schema_version", 1}, {"candidates", out_candidates}};
  save_json_file(result, out_path, "placement result");
  if (cfg.verbose) std::cerr << "plan: wrote " << out_path << "\n";
}

void cmd_eval(const std::string& benchmark_dir, const std::string& out_json,
              const std::string& out_csv, bool oracle, const RunConfig& cfg) {
  const std::vector<LabeledSample> benchmark = load_benchmark_dir(benchmark_dir);
  EvalResult result;
  if (oracle) {
    const PlannerFn gt_planner = [](const LabeledSample& sample, std::uint64_t) {
      PlacementCandidate cand;
      cand.pose = sample.gt_pose;
      return cand;
    };
    result = run_eval_with(gt_planner, "oracle-gt", benchmark, cfg.seed, resolve_workers(cfg));
  } else {
    PlannerConfig planner = cfg.planner;
    planner.seed = cfg.seed;
    result = run_eval(planner, benchmark, cfg.n_candidates, resolve_workers(cfg));
  }
  save_eval_report(result, out_json, out_csv);
  std::cout << "PA " << fmt_double(result.pa_percent) << " PP " << fmt_double(result.pp_percent)
            << " SR " << fmt_double(result.sr_percent) << "\n";
}

void cmd_export_ply(const std::string& scene_path, const std::string& out_path,
                    const RunConfig& cfg) {
  const Scene scene = load_scene(scene_path);
  write_ply(out_path, scene.scene_cloud());
  if (cfg.verbose) std::cerr << "export-ply: wrote " << out_path << "\n";
}

void emit_error(const std::string& kind, const std::string& message) {
  const json err{{"error", json{{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

}  // namespace

void RunConfig::validate() const {
  planner.validate();
  if (workers < 0) fail("invalid_argument", "config: workers must be >= 0");
  if (n_candidates < 1) fail("invalid_argument", "config: n_candidates must be >= 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0))
    fail("invalid_argument", "config: crossover_rate must lie in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
    fail("invalid_argument", "config: mutation_rate must lie in [0, 1]");
  if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0))
    fail("invalid_argument", "config: similarity_threshold must lie in (0, 1)");
  if (refine_steps < 1 || !(refine_step_size > 0.0) || refine_reg_weight < 0.0)
    fail("invalid_argument", "config: refinement parameters are inconsistent");
  if (n_plans < 1) fail("invalid_argument", "config: n_plans must be >= 1");
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"schema_version"},
             {"seed", "workers", "verbose", "schedule", "guidance", "planner", "augment",
              "refine", "sample"},
             "run config");
  check_schema_version(j, 1, "run config");
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (j.contains("verbose")) cfg.verbose = j["verbose"].get<bool>();

  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {}, {"steps", "beta_start", "beta_end", "translation_scale", "yaw_scale"},
               "run config schedule");
    NoiseSchedule def;
    const int steps = s.value("steps", 100);
    const double beta_start = s.value("beta_start", 1e-4);
    const double beta_end = s.value("beta_end", 0.27);
    NoiseSchedule schedule = NoiseSchedule::linear(steps, beta_start, beta_end);
    schedule.translation_scale = s.value("translation_scale", def.translation_scale);
    schedule.yaw_scale = s.value("yaw_scale", def.yaw_scale);
    schedule.validate();
    cfg.planner.schedule = schedule;
  }
  if (j.contains("guidance")) {
    const json& g = j["guidance"];
    check_keys(g, {},
               {"lambda_afford", "lambda_collide", "afford_enabled", "collide_enabled",
                "threshold_frac", "gradient_clamp"},
               "run config guidance");
    GuidanceConfig& gc = cfg.planner.guidance;
    gc.lambda_afford = g.value("lambda_afford", gc.lambda_afford);
    gc.lambda_collide = g.value("lambda_collide", gc.lambda_collide);
    gc.afford_enabled = g.value("afford_enabled", gc.afford_enabled);
    gc.collide_enabled = g.value("collide_enabled", gc.collide_enabled);
    gc.threshold_frac = g.value("threshold_frac", gc.threshold_frac);
    gc.gradient_clamp = g.value("gradient_clamp", gc.gradient_clamp);
  }
  if (j.contains("planner")) {
    const json& p = j["planner"];
    check_keys(p, {},
               {"sampled_target_count", "coarse_clusters", "coarse_top_k", "tsdf_voxel",
                "tsdf_truncation", "tsdf_padding", "n_candidates"},
               "run config planner");
    cfg.planner.sampled_target_count =
        p.value("sampled_target_count", cfg.planner.sampled_target_count);
    cfg.planner.coarse_clusters = p.value("coarse_clusters", cfg.planner.coarse_clusters);
    cfg.planner.coarse_top_k = p.value("coarse_top_k", cfg.planner.coarse_top_k);
    cfg.planner.tsdf_voxel = p.value("tsdf_voxel", cfg.planner.tsdf_voxel);
    cfg.planner.tsdf_truncation = p.value("tsdf_truncation", cfg.planner.tsdf_truncation);
    cfg.planner.tsdf_padding = p.value("tsdf_padding", cfg.planner.tsdf_padding);
    cfg.n_candidates = p.value("n_candidates", cfg.n_candidates);
  }
  if (j.contains("augment")) {
    const json& a = j["augment"];
    check_keys(a, {}, {"crossover_rate", "mutation_rate", "similarity_threshold"},
               "run config augment");
    cfg.crossover_rate = a.value("crossover_rate", cfg.crossover_rate);
    cfg.mutation_rate = a.value("mutation_rate", cfg.mutation_rate);
    cfg.similarity_threshold = a.value("similarity_threshold", cfg.similarity_threshold);
  }
  if (j.contains("refine")) {
    const json& r = j["refine"];
    check_keys(r, {}, {"steps", "step_size", "reg_weight"}, "run config refine");
    cfg.refine_steps = r.value("steps", cfg.refine_steps);
    cfg.refine_step_size = r.value("step_size", cfg.refine_step_size);
    cfg.refine_reg_weight = r.value("reg_weight", cfg.refine_reg_weight);
  }
  if (j.contains("sample")) {
    const json& s = j["sample"];
    check_keys(s, {}, {"n_plans"}, "run config sample");
    cfg.n_plans = s.value("n_plans", cfg.n_plans);
  }
  cfg.validate();
  return cfg;
}

json run_config_json(const RunConfig& cfg) {
  return json{
      {"schema_version", 1},
      {"seed", cfg.seed},
      {"workers", cfg.workers},
      {"verbose", cfg.verbose},
      {"schedule",
       json{{"steps", cfg.planner.schedule.steps()},
            {"beta_start", cfg.planner.schedule.betas.front()},
            {"beta_end", cfg.planner.schedule.betas.back()},
            {"translation_scale", cfg.planner.schedule.translation_scale},
            {"yaw_scale", cfg.planner.schedule.yaw_scale}}},
      {"guidance",
       json{{"lambda_afford", cfg.planner.guidance.lambda_afford},
            {"lambda_collide", cfg.planner.guidance.lambda_collide},
            {"afford_enabled", cfg.planner.guidance.afford_enabled},
            {"collide_enabled", cfg.planner.guidance.collide_enabled},
            {"threshold_frac", cfg.planner.guidance.threshold_frac},
            {"gradient_clamp", cfg.planner.guidance.gradient_clamp}}},
      {"planner",
       json{{"sampled_target_count", cfg.planner.sampled_target_count},
            {"coarse_clusters", cfg.planner.coarse_clusters},
            {"coarse_top_k", cfg.planner.coarse_top_k},
            {"tsdf_voxel", cfg.planner.tsdf_voxel},
            {"tsdf_truncation", cfg.planner.tsdf_truncation},
            {"tsdf_padding", cfg.planner.tsdf_padding},
            {"n_candidates", cfg.n_candidates}}},
      {"augment",
       json{{"crossover_rate", cfg.crossover_rate},
            {"mutation_rate", cfg.mutation_rate},
            {"similarity_threshold", cfg.similarity_threshold}}},
      {"refine",
       json{{"steps", cfg.refine_steps},
            {"step_size", cfg.refine_step_size},
            {"reg_weight", cfg.refine_reg_weight}}},
      {"sample", json{{"n_plans", cfg.n_plans}}}};
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(load_json_file(path, "run config"));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Tabletop placement planning: scene-graph data synthesis, affordance fields, "
               "guided diffusion placement, and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int workers_flag = 0;
  bool verbose_flag = false;
  app.add_option("--config", config_path, "RunConfig JSON document");
  CLI::Option* seed_opt = app.add_option("--seed", seed_flag, "Global seed override");
  CLI::Option* workers_opt =
      app.add_option("--workers", workers_flag, "Worker threads (0 = all cores)");
  app.add_flag("--verbose", verbose_flag, "Progress notes on stderr");

  CLI::App* abstract = app.add_subcommand("abstract", "Scene JSONs -> scene graph JSONs");
  std::string scenes_dir, abstract_out;
  abstract->add_option("--scenes", scenes_dir, "Directory of scene JSON files")->required();
  abstract->add_option("--out", abstract_out, "Output graph directory")->required();

  CLI::App* augment = app.add_subcommand("augment", "Crossover + mutation over a graph corpus");
  std::string aug_graphs, aug_out;
  int n_out = 0;
  augment->add_option("--graphs", aug_graphs, "Directory of graph JSON files")->required();
  augment->add_option("--out", aug_out, "Output graph directory")->required();
  augment->add_option("--n-out", n_out, "Number of augmented graphs")->required();

  CLI::App* generate = app.add_subcommand("generate", "Generate a labeled benchmark corpus");
  std::string gen_graphs, gen_out, split = "syn-easy";
  int gen_scenes = 100;
  int min_objects = 0, max_objects = 0;
  std::string density;
  generate->add_option("--graphs", gen_graphs, "Directory of graph JSON files")->required();
  generate->add_option("--out", gen_out, "Output corpus directory")->required();
  generate->add_option("--split", split, "syn-easy, syn-hard, or a custom name");
  generate->add_option("--scenes", gen_scenes, "Number of scenes");
  generate->add_option("--min-objects", min_objects, "Custom split: min objects per scene");
  generate->add_option("--max-objects", max_objects, "Custom split: max objects per scene");
  generate->add_option("--density", density, "Custom split: sparse or dense");

  CLI::App* plan = app.add_subcommand("plan", "Sample placement poses for one scene");
  std::string plan_scene, plan_plans, plan_object, plan_out;
  plan->add_option("--scene", plan_scene, "Scene JSON")->required();
  plan->add_option("--plans", plan_plans, "Structured plan JSON")->required();
  plan->add_option("--object-ply", plan_object, "Subject point cloud (PLY)")->required();
  plan->add_option("--out", plan_out, "Output result JSON")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score a planner on a generated benchmark");
  std::string bench_dir, eval_json, eval_csv, planner_config;
  bool oracle = false;
  eval->add_option("--benchmark", bench_dir, "Benchmark corpus directory")->required();
  eval->add_option("--out", eval_json, "Report JSON path")->required();
  eval->add_option("--csv", eval_csv, "Per-case CSV path");
  eval->add_option("--planner-config", planner_config,
                   "RunConfig JSON for the planner (overrides --config)");
  eval->add_flag("--oracle", oracle, "Score the ground-truth poses instead of the planner");

  CLI::App* export_ply = app.add_subcommand("export-ply", "Concatenate a scene cloud into a PLY");
  std::string export_scene, export_out;
  export_ply->add_option("--scene", export_scene, "Scene JSON")->required();
  export_ply->add_option("--out", export_out, "Output PLY path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("cli_error", e.what());
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    std::string effective_config = config_path;
    if (eval->parsed() && !planner_config.empty()) effective_config = planner_config;
    RunConfig cfg = effective_config.empty() ? RunConfig{} : load_run_config(effective_config);
    if (seed_opt->count() > 0) cfg.seed = seed_flag;
    if (workers_opt->count() > 0) cfg.workers = workers_flag;
    if (verbose_flag) cfg.verbose = true;
    cfg.validate();

    if (abstract->parsed()) {
      cmd_abstract(scenes_dir, abstract_out, cfg);
    } else if (augment->parsed()) {
      cmd_augment(aug_graphs, aug_out, n_out, cfg);
    } else if (generate->parsed()) {
      BenchmarkSpec spec;
      if (split == "syn-easy" && min_objects == 0 && max_objects == 0 && density.empty()) {
        spec = BenchmarkSpec::syn_easy(gen_scenes, cfg.seed);
      } else if (split == "syn-hard" && min_objects == 0 && max_objects == 0 && density.empty()) {
        spec = BenchmarkSpec::syn_hard(gen_scenes, cfg.seed);
      } else {
        spec.split = split;
        spec.min_objects = min_objects;
        spec.max_objects = max_objects;
        if (density == "sparse") {
          spec.density = DensityMode::Sparse;
        } else if (density == "dense") {
          spec.density = DensityMode::Dense;
        } else {
          fail("invalid_argument", "generate: --density must be 'sparse' or 'dense'");
        }
        spec.n_scenes = gen_scenes;
        spec.seed = cfg.seed;
        spec.validate();
      }
      cmd_generate(gen_graphs, gen_out, spec, cfg);
    } else if (plan->parsed()) {
      cmd_plan(plan_scene, plan_plans, plan_object, plan_out, cfg);
    } else if (eval->parsed()) {
      cmd_eval(bench_dir, eval_json, eval_csv, oracle, cfg);
    } else if (export_ply->parsed()) {
      cmd_export_ply(export_scene, export_out, cfg);
    }
    return 0;
  } catch (const Error& e) {
    emit_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("internal_error", e.what());
    return 1;
  }
}

}  // namespace placekit
