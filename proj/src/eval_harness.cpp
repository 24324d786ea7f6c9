// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "placekit/json_util.hpp"

namespace placekit {
namespace {

constexpr int kSceneRetries = 50;
constexpr int kPlacementAttempts = 200;  // layout tries per object
constexpr double kLayoutBound = 1.2;     // max |center coordinate| in meters
constexpr double kMutationRate = 0.3;
constexpr double kMutationSimilarity = 0.4;

struct LayoutItem {
  std::string category;
  Vec3 extent{0.0, 0.0, 0.0};
  Vec2 pos{0.0, 0.0};
};

/// Exact distance between two axis-aligned rectangles (centers c, half
/// extents h); 0 when they touch or overlap.
double rect_gap(const Vec2& ca, const Vec2& ha, const Vec2& cb, const Vec2& hb) {
  const double dx = std::max(0.0, std::abs(ca.x() - cb.x()) - (ha.x() + hb.x()));
  const double dy = std::max(0.0, std::abs(ca.y() - cb.y()) - (ha.y() + hb.y()));
  return std::hypot(dx, dy);
}

Vec2 half_extent(const LayoutItem& item) {
  return Vec2(item.extent.x() / 2.0, item.extent.y() / 2.0);
}

/// Center distance along `dir` at which the rectangle gap equals `gap`
/// (monotone past contact, solved by bisection).
double solve_offset(const Vec2& dir, const Vec2& ha, const Vec2& hb, double gap) {
  const Vec2 sum = ha + hb;
  const auto gap_at = [&](double t) {
    const double dx = std::max(0.0, t * std::abs(dir.x()) - sum.x());
    const double dy = std::max(0.0, t * std::abs(dir.y()) - sum.y());
    return std::hypot(dx, dy);
  };
  double lo = 0.0;
  double hi = std::sqrt(2.0) * (sum.x() + sum.y() + gap) + 1.0;
  while (gap_at(hi) < gap) hi *= 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap_at(mid) < gap ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Places every item so its nearest footprint gap lies in [g_lo, g_hi];
/// false when an item cannot be placed within the attempt budget.
bool layout_scene(std::vector<LayoutItem>& items, double g_lo, double g_hi, RandomStream& rng) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const std::size_t j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      const double gap = rng.uniform(g_lo, g_hi);
      const Vec2 dir(std::cos(theta), std::sin(theta));
      const double offset = solve_offset(dir, half_extent(items[i]), half_extent(items[j]), gap);
      const Vec2 cand = items[j].pos + offset * dir;
      if (std::abs(cand.x()) > kLayoutBound || std::abs(cand.y()) > kLayoutBound) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < i; ++k)
        nearest = std::min(nearest,
                           rect_gap(cand, half_extent(items[i]), items[k].pos, half_extent(items[k])));
      if (nearest >= g_lo - 1e-9 && nearest <= g_hi + 1e-9) {
        items[i].pos = cand;
        placed = true;
      }
    }
    if (!placed) return false;
  }
  return true;
}

/// One full scene + sample attempt; throws Error on any infeasibility.
LabeledSample build_case(std::uint64_t attempt_seed, const BenchmarkSpec& spec,
                         const std::vector<SceneGraph>& demo_graphs, const ShapeLibrary& library,
                         const SimilarityTable& table,
                         const std::vector<std::string>& library_categories, double g_lo,
                         double g_hi) {
  RandomStream rng(derive_seed(attempt_seed, 1));

  const auto ia = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(demo_graphs.size()) - 1));
  const auto ib = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(demo_graphs.size()) - 1));
  SceneGraph base = demo_graphs[ia];
  if (ia != ib) {
    const auto edges = pick_matching_edges(base, demo_graphs[ib], rng);
    if (edges.has_value()) {
      base = crossover(base, demo_graphs[ib], edges->first, edges->second, 1.0,
                       derive_seed(attempt_seed, 2))
                 .first;
    }
  }
  base = mutate(base, table, library_categories, kMutationSimilarity, kMutationRate,
                derive_seed(attempt_seed, 3));

  std::vector<std::string> pool;
  for (const GraphNode& node : base.nodes)
    if (library.has(node.category)) pool.push_back(node.category);
  if (pool.empty())
    fail("unknown_category", "gen_benchmark: no demonstration category is in the shape library");

  const int n = static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
  rng.shuffle(pool);
  std::vector<std::string> categories;
  categories.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i < static_cast<int>(pool.size())) {
      categories.push_back(pool[static_cast<std::size_t>(i)]);
    } else {
      categories.push_back(pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
    }
  }

  const std::uint64_t inst_seed = derive_seed(attempt_seed, 4);
  std::vector<LayoutItem> items(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    items[static_cast<std::size_t>(i)].category = categories[static_cast<std::size_t>(i)];
    items[static_cast<std::size_t>(i)].extent = library.sample_extent(
        categories[static_cast<std::size_t>(i)], derive_seed(inst_seed, static_cast<std::uint64_t>(i)));
  }
  if (!layout_scene(items, g_lo, g_hi, rng))
    fail("layout_failure", "gen_benchmark: could not place every object in the margin band");

  std::vector<GraphNode> nodes(items.size());
  double span_x = 0.0, span_y = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    nodes[i].id = static_cast<int>(i);
    nodes[i].category = items[i].category;
    nodes[i].centroid = Vec3(items[i].pos.x(), items[i].pos.y(), items[i].extent.z() / 2.0);
    span_x = std::max(span_x, std::abs(items[i].pos.x()));
    span_y = std::max(span_y, std::abs(items[i].pos.y()));
  }
  const SceneGraph graph = build_graph(nodes, 0.0);
  const Scene scene =
      instantiate(graph, library, Vec3(2.0 * span_x + 0.05, 2.0 * span_y + 0.05, 0.05), inst_seed);
  // The margin-band layout is collision-free by construction, so refinement
  // is a no-op pass that still enforces the factory invariant.
  const RefineResult refined = refine_poses(scene);
  if (!refined.removed_ids.empty() || max_scene_penetration(refined.scene) > kPenetrationEps)
    fail("internal_error", "gen_benchmark: margin-band layout produced a collision");
  return make_sample(refined.scene, 1, derive_seed(attempt_seed, 5));
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char ch : value) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

BenchmarkSpec BenchmarkSpec::syn_easy(int n_scenes, std::uint64_t seed) {
  BenchmarkSpec spec;
  spec.split = "syn-easy";
  spec.min_objects = 5;
  spec.max_objects = 8;
  spec.density = DensityMode::Sparse;
  spec.n_scenes = n_scenes;
  spec.seed = seed;
  spec.validate();
  return spec;
}

BenchmarkSpec BenchmarkSpec::syn_hard(int n_scenes, std::uint64_t seed) {
  BenchmarkSpec spec;
  spec.split = "syn-hard";
  spec.min_objects = 8;
  spec.max_objects = 12;
  spec.density = DensityMode::Dense;
  spec.n_scenes = n_scenes;
  spec.seed = seed;
  spec.validate();
  return spec;
}

void BenchmarkSpec::validate() const {
  if (min_objects < 1 || max_objects < min_objects)
    fail("invalid_argument", "benchmark spec: object count range must be positive");
  if (n_scenes < 1) fail("invalid_argument", "benchmark spec: n_scenes must be >= 1");
  if (split == "syn-easy" &&
      (min_objects != 5 || max_objects != 8 || density != DensityMode::Sparse))
    fail("invalid_argument", "benchmark spec: syn-easy is 5-8 objects, sparse");
  if (split == "syn-hard" &&
      (min_objects != 8 || max_objects != 12 || density != DensityMode::Dense))
    fail("invalid_argument", "benchmark spec: syn-hard is 8-12 objects, dense");
}

std::vector<LabeledSample> gen_benchmark(const BenchmarkSpec& spec,
                                         const std::vector<SceneGraph>& demo_graphs,
                                         const ShapeLibrary& library) {
  spec.validate();
  if (demo_graphs.empty())
    fail("invalid_argument", "gen_benchmark: demonstration graph corpus is empty");
  for (const SceneGraph& g : demo_graphs)
    if (g.nodes.empty()) fail("invalid_argument", "gen_benchmark: demonstration graph has no nodes");

  const SimilarityTable table = SimilarityTable::builtin();
  const std::vector<std::string> library_categories = library.categories();
  const double g_lo = spec.density == DensityMode::Dense ? 0.02 : 0.08;
  const double g_hi = spec.density == DensityMode::Dense ? 0.05 : 0.15;

  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(spec.n_scenes));
  for (int scene_index = 0; scene_index < spec.n_scenes; ++scene_index) {
    bool done = false;
    for (int retry = 0; retry < kSceneRetries && !done; ++retry) {
      const std::uint64_t attempt_seed =
          derive_seed(spec.seed, static_cast<std::uint64_t>(scene_index) * 64 + retry);
      try {
        out.push_back(build_case(attempt_seed, spec, demo_graphs, library, table,
                                 library_categories, g_lo, g_hi));
        done = true;
      } catch (const Error& e) {
        if (e.kind() != "layout_failure" && e.kind() != "infeasible_sample" &&
            e.kind() != "infeasible_scene")
          throw;
      }
    }
    if (!done)
      fail("infeasible_spec", "gen_benchmark: scene " + std::to_string(scene_index) +
                                  " still infeasible after " + std::to_string(kSceneRetries) +
                                  " retries");
  }
  return out;
}

bool eval_pa(const Pose& placed, const LabeledSample& sample, const Vec3& subject_extent) {
  if (sample.plans.empty()) fail("invalid_argument", "eval_pa: sample carries no plans");
  try {
    return annotate_region(sample.scene, sample.plans, subject_extent).contains(placed.t);
  } catch (const Error& e) {
    if (e.kind() == "infeasible_plan_set") return false;
    throw;
  }
}

std::pair<bool, double> eval_pp(const Pose& placed, const LabeledSample& sample,
                                const PointCloud& object_points) {
  object_points.require_valid("eval_pp object points");
  const Footprint placed_fp = Footprint::of(object_points.transformed(placed).points);
  double worst = 0.0;
  for (const SceneObject& obj : sample.scene.objects)
    worst = std::max(worst, prism_penetration(placed_fp, obj.world_footprint()));
  return {worst <= kPenetrationEps, worst};
}

EvalResult run_eval_with(const PlannerFn& planner, const std::string& name,
                         const std::vector<LabeledSample>& benchmark, std::uint64_t seed,
                         int workers) {
  if (benchmark.empty()) fail("invalid_argument", "run_eval: benchmark is empty");
  if (workers < 1) fail("invalid_argument", "run_eval: workers must be >= 1");

  EvalResult result;
  result.planner_name = name;
  result.cases.resize(benchmark.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= benchmark.size()) break;
      const LabeledSample& sample = benchmark[i];
      EvalResult::Case c;
      c.index = static_cast<int>(i);
      c.planner_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      try {
        const PlacementCandidate cand = planner(sample, c.planner_seed);
        c.final_cost = cand.final_cost;
        c.pa = eval_pa(cand.pose, sample, sample.dropped_object.extent);
        const auto [collision_free, penetration] =
            eval_pp(cand.pose, sample, sample.dropped_object.points);
        c.pp = collision_free;
        c.penetration = penetration;
        c.sr = c.pa && c.pp;
      } catch (const std::exception& e) {
        c.pa = c.pp = c.sr = false;
        c.penetration = 0.0;
        c.final_cost = 0.0;
        c.error = e.what();
      }
      result.cases[i] = std::move(c);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  int pa = 0, pp = 0, sr = 0;
  for (const EvalResult::Case& c : result.cases) {
    pa += c.pa ? 1 : 0;
    pp += c.pp ? 1 : 0;
    sr += c.sr ? 1 : 0;
  }
  const double n = static_cast<double>(result.cases.size());
  result.pa_percent = 100.0 * pa / n;
  result.pp_percent = 100.0 * pp / n;
  result.sr_percent = 100.0 * sr / n;
  return result;
}

EvalResult run_eval(const PlannerConfig& config, const std::vector<LabeledSample>& benchmark,
                    int n_candidates, int workers) {
  config.validate();
  if (n_candidates < 1) fail("invalid_argument", "run_eval: need at least one candidate");
  const PlannerFn planner = [&config, n_candidates](const LabeledSample& sample,
                                                    std::uint64_t case_seed) {
    PlannerConfig cfg = config;
    cfg.seed = case_seed;
    return plan_placement(sample.scene, sample.plans, sample.dropped_object.points, n_candidates,
                          cfg)
        .front();
  };
  return run_eval_with(planner, "guided-diffusion", benchmark, config.seed, workers);
}

void save_eval_report(const EvalResult& result, const std::string& json_path,
                      const std::string& csv_path) {
  if (!json_path.empty()) {
    json cases = json::array();
    for (const EvalResult::Case& c : result.cases) {
      cases.push_back(json{{"index", c.index},
                           {"seed", c.planner_seed},
                           {"pa", c.pa},
                           {"pp", c.pp},
                           {"sr", c.sr},
                           {"penetration", c.penetration},
                           {"final_cost", c.final_cost},
                           {"error", c.error}});
    }
    const json report{{"schema_version", 1},
                      {"planner", result.planner_name},
                      {"n_cases", result.cases.size()},
                      {"metrics",
                       json{{"pa", result.pa_percent},
                            {"pp", result.pp_percent},
                            {"sr", result.sr_percent}}},
                      {"cases", cases}};
    save_json_file(report, json_path, "eval report");
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) fail("io_error", "save_eval_report: cannot open " + csv_path);
    out << "index,seed,pa,pp,sr,penetration,final_cost,error\n";
    for (const EvalResult::Case& c : result.cases) {
      out << c.index << ',' << c.planner_seed << ',' << (c.pa ? 1 : 0) << ',' << (c.pp ? 1 : 0)
          << ',' << (c.sr ? 1 : 0) << ',' << fmt_double(c.penetration) << ','
          << fmt_double(c.final_cost) << ',' << csv_field(c.error) << '\n';
    }
    if (!out.good()) fail("io_error", "save_eval_report: failed writing " + csv_path);
  }
}

}  // namespace placekit
