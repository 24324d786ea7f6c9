// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "placekit/planner.hpp"
#include "placekit/scene_factory.hpp"
#include "placekit/scene_graph.hpp"
#include "placekit/scene_model.hpp"

namespace placekit {

/// How tightly a generated split packs its objects: sparse keeps nearest
/// footprint gaps in [8, 15] cm, dense in [2, 5] cm.
enum class DensityMode { Sparse, Dense };

/// Parameters of one generated benchmark split.
/// Invariants: 1 <= min_objects <= max_objects; n_scenes >= 1; the reserved
/// split names "syn-easy" (5-8 objects, sparse) and "syn-hard" (8-12
/// objects, dense) must carry exactly their canonical ranges and density.
struct BenchmarkSpec {
  std::string split = "syn-easy";
  int min_objects = 5;
  int max_objects = 8;
  DensityMode density = DensityMode::Sparse;
  int n_scenes = 100;
  std::uint64_t seed = 0;

  static BenchmarkSpec syn_easy(int n_scenes, std::uint64_t seed);
  static BenchmarkSpec syn_hard(int n_scenes, std::uint64_t seed);
  void validate() const;
};

/// Generates `spec.n_scenes` labeled samples. Each scene draws its category
/// mix from crossover/mutation of the demonstration graphs, lays the objects
/// out with nearest-neighbor footprint gaps inside the split's margin band,
/// rebuilds the scene graph from the laid-out centroids, instantiates it
/// through the shape library, and holds one object out via make_sample.
/// Every emitted scene is collision-free and deterministic in spec.seed.
/// pre: demo_graphs non-empty (each with at least one node).
/// errors: "infeasible_spec" when a scene still fails after 50 retries.
std::vector<LabeledSample> gen_benchmark(const BenchmarkSpec& spec,
                                         const std::vector<SceneGraph>& demo_graphs,
                                         const ShapeLibrary& library);

/// Placement accuracy: true iff the placed pose's translation lies inside
/// the analytic constraint region of the sample's plans. An empty region
/// contains nothing, so it yields false rather than an error.
bool eval_pa(const Pose& placed, const LabeledSample& sample, const Vec3& subject_extent);

/// Placement physics: max footprint-prism penetration of the posed subject
/// against every non-receptacle scene object (same oracle the scene factory
/// uses). Passes iff the max penetration is at most 5 mm (inclusive).
std::pair<bool, double> eval_pp(const Pose& placed, const LabeledSample& sample,
                                const PointCloud& object_points);

/// Metrics for one benchmark run. Per case sr = pa && pp; aggregates are
/// case means expressed as percentages.
struct EvalResult {
  struct Case {
    int index = 0;
    std::uint64_t planner_seed = 0;
    bool pa = false;
    bool pp = false;
    bool sr = false;
    double penetration = 0.0;
    double final_cost = 0.0;
    std::string error;  ///< non-empty when the planner failed on this case
  };
  std::string planner_name;
  std::vector<Case> cases;
  double pa_percent = 0.0;
  double pp_percent = 0.0;
  double sr_percent = 0.0;
};

/// Pluggable per-case planner: maps a sample and a per-case seed to the pose
/// that will be scored (plus its reported costs). Exceptions mark the case
/// as failed on all metrics.
using PlannerFn = std::function<PlacementCandidate(const LabeledSample&, std::uint64_t seed)>;

/// Scores every benchmark case with the guided diffusion planner (top-ranked
/// of `n_candidates` candidates; case i runs with seed
/// derive_seed(config.seed, i)). `workers` > 1 evaluates cases on that many
/// threads; results are independent of the worker count.
/// pre: benchmark non-empty.
EvalResult run_eval(const PlannerConfig& config, const std::vector<LabeledSample>& benchmark,
                    int n_candidates = 8, int workers = 1);

/// Same scoring loop with a caller-supplied planner (e.g. a ground-truth
/// oracle); `name` labels the report.
EvalResult run_eval_with(const PlannerFn& planner, const std::string& name,
                         const std::vector<LabeledSample>& benchmark, std::uint64_t seed = 0,
                         int workers = 1);

/// Writes the versioned JSON report and the per-case CSV (pass an empty
/// path to skip either). Reports contain no timestamps, so reruns under the
/// same seed are byte-identical.
void save_eval_report(const EvalResult& result, const std::string& json_path,
                      const std::string& csv_path);

}  // namespace placekit
