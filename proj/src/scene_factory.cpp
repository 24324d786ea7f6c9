// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/scene_factory.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "serialize_detail.hpp"

namespace placekit {

namespace {

constexpr double kFitMargin = 0.02;  // receptacle margin around footprints
// Receptacles are sampled at a surface density comparable to the tabletop
// objects (220 points over ~0.05-0.15 m^2); a flat budget would leave large
// tables too sparse to anchor affordance fields over free surface.
constexpr double kReceptacleDensity = 1500.0;  // points per m^2
constexpr int kReceptaclePointsMin = 700;
constexpr int kReceptaclePointsMax = 6000;
constexpr std::uint64_t kReceptacleSalt = 0x524543505443ULL;  // outside node-id space

int receptacle_point_count(const Vec3& ext) {
  const double area = 2.0 * (ext.x() * ext.y() + ext.x() * ext.z() + ext.y() * ext.z());
  const int n = static_cast<int>(std::lround(area * kReceptacleDensity));
  return std::clamp(n, kReceptaclePointsMin, kReceptaclePointsMax);
}

// ---------------------------------------------------------------------------
// Procedural geometry: every shape is a union of axis-aligned boxes and
// upright cylinders, built in a canonical frame spanning exactly
// [-ex/2, ex/2] x [-ey/2, ey/2] x [0, ez], then turned by quarter turns.

struct BoxPart {
  Vec3 lo, hi;
};

struct CylPart {
  Vec2 center;
  double radius = 0.0;
  double z0 = 0.0, z1 = 0.0;
};

struct PartSet {
  std::vector<BoxPart> boxes;
  std::vector<CylPart> cyls;
};

Vec2 rot90(Vec2 p, int quarter_turns) {
  for (int i = 0; i < quarter_turns; ++i) p = Vec2(-p.y(), p.x());
  return p;
}

PartSet make_parts(ShapeLibrary::Kind kind, const std::string& category, const Vec3& e) {
  PartSet parts;
  switch (kind) {
    case ShapeLibrary::Kind::Box:
      parts.boxes.push_back(
          {Vec3(-e.x() / 2, -e.y() / 2, 0.0), Vec3(e.x() / 2, e.y() / 2, e.z())});
      return parts;
    case ShapeLibrary::Kind::Cylinder:
      parts.cyls.push_back({Vec2(0, 0), e.x() / 2, 0.0, e.z()});
      return parts;
    case ShapeLibrary::Kind::Composite:
      break;
  }
  if (category == "mug") {
    const double d = e.y();  // body diameter; the handle fills the rest of x
    const double bx = -(e.x() - d) / 2.0;
    parts.cyls.push_back({Vec2(bx, 0), d / 2, 0.0, e.z()});
    parts.boxes.push_back({Vec3(bx + 0.3 * d, -0.1 * e.y(), 0.3 * e.z()),
                           Vec3(e.x() / 2, 0.1 * e.y(), 0.75 * e.z())});
  } else if (category == "bottle") {
    parts.cyls.push_back({Vec2(0, 0), e.x() / 2, 0.0, 0.65 * e.z()});
    parts.cyls.push_back({Vec2(0, 0), 0.45 * e.x() / 2, 0.65 * e.z(), e.z()});
  } else if (category == "plant") {
    parts.cyls.push_back({Vec2(0, 0), 0.35 * e.x(), 0.0, 0.4 * e.z()});
    parts.cyls.push_back({Vec2(0, 0), e.x() / 2, 0.4 * e.z(), e.z()});
  } else if (category == "lamp") {
    parts.cyls.push_back({Vec2(0, 0), e.x() / 2, 0.0, 0.15 * e.z()});
    parts.cyls.push_back({Vec2(0, 0), 0.06 * e.x(), 0.15 * e.z(), 0.6 * e.z()});
    parts.cyls.push_back({Vec2(0, 0), 0.4 * e.x(), 0.6 * e.z(), e.z()});
  } else {
    fail("unknown_category", "no composite layout for '" + category + "'");
  }
  return parts;
}

void rotate_parts(PartSet& parts, int quarter_turns) {
  if (quarter_turns % 4 == 0) return;
  for (BoxPart& b : parts.boxes) {
    const Vec2 c0 = rot90(Vec2(b.lo.x(), b.lo.y()), quarter_turns);
    const Vec2 c1 = rot90(Vec2(b.hi.x(), b.hi.y()), quarter_turns);
    b.lo.x() = std::min(c0.x(), c1.x());
    b.lo.y() = std::min(c0.y(), c1.y());
    b.hi.x() = std::max(c0.x(), c1.x());
    b.hi.y() = std::max(c0.y(), c1.y());
  }
  for (CylPart& c : parts.cyls) c.center = rot90(c.center, quarter_turns);
}

void part_bounds(const PartSet& parts, Vec3& lo, Vec3& hi) {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const BoxPart& b : parts.boxes) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  for (const CylPart& c : parts.cyls) {
    lo = lo.cwiseMin(Vec3(c.center.x() - c.radius, c.center.y() - c.radius, c.z0));
    hi = hi.cwiseMax(Vec3(c.center.x() + c.radius, c.center.y() + c.radius, c.z1));
  }
}

// Extreme points that pin the exact AABB of each part.
void pin_points(const PartSet& parts, PointCloud& cloud) {
  for (const BoxPart& b : parts.boxes)
    for (int cx = 0; cx < 2; ++cx)
      for (int cy = 0; cy < 2; ++cy)
        for (int cz = 0; cz < 2; ++cz)
          cloud.points.emplace_back(cx ? b.hi.x() : b.lo.x(), cy ? b.hi.y() : b.lo.y(),
                                    cz ? b.hi.z() : b.lo.z());
  for (const CylPart& c : parts.cyls)
    for (double z : {c.z0, c.z1}) {
      cloud.points.emplace_back(c.center.x() + c.radius, c.center.y(), z);
      cloud.points.emplace_back(c.center.x() - c.radius, c.center.y(), z);
      cloud.points.emplace_back(c.center.x(), c.center.y() + c.radius, z);
      cloud.points.emplace_back(c.center.x(), c.center.y() - c.radius, z);
    }
}

void sample_parts(const PartSet& parts, int n_points, RandomStream& rng, PointCloud& cloud) {
  // One element per sampleable surface: 6 faces per box, lateral/top/bottom
  // per cylinder. Vertical surfaces are over-weighted: tabletop collisions
  // are resolved in the horizontal plane, so the silhouette needs dense
  // coverage, and plain area weighting leaves thin objects' sides almost
  // empty.
  constexpr double kVerticalWeight = 3.0;
  struct Element {
    int type;  // 0-5 box face, 6 lateral, 7 top disk, 8 bottom disk
    const BoxPart* box = nullptr;
    const CylPart* cyl = nullptr;
  };
  std::vector<Element> elems;
  std::vector<double> areas;
  for (const BoxPart& b : parts.boxes) {
    const Vec3 d = b.hi - b.lo;
    const double face_area[3] = {d.y() * d.z(), d.x() * d.z(), d.x() * d.y()};
    for (int f = 0; f < 6; ++f) {
      elems.push_back({f, &b, nullptr});
      areas.push_back(face_area[f / 2] * (f < 4 ? kVerticalWeight : 1.0));
    }
  }
  for (const CylPart& c : parts.cyls) {
    elems.push_back({6, nullptr, &c});
    areas.push_back(2.0 * M_PI * c.radius * (c.z1 - c.z0) * kVerticalWeight);
    elems.push_back({7, nullptr, &c});
    areas.push_back(M_PI * c.radius * c.radius);
    elems.push_back({8, nullptr, &c});
    areas.push_back(M_PI * c.radius * c.radius);
  }
  for (int i = 0; i < n_points; ++i) {
    const Element& e = elems[rng.weighted_pick(areas)];
    if (e.type < 6) {
      const BoxPart& b = *e.box;
      const int axis = e.type / 2;
      const double held = (e.type % 2) ? b.hi[axis] : b.lo[axis];
      Vec3 p;
      p[axis] = held;
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      p[u] = rng.uniform(b.lo[u], b.hi[u]);
      p[v] = rng.uniform(b.lo[v], b.hi[v]);
      cloud.points.push_back(p);
    } else if (e.type == 6) {
      const CylPart& c = *e.cyl;
      const double a = rng.uniform(0.0, 2.0 * M_PI);
      const double z = rng.uniform(c.z0, c.z1);
      cloud.points.emplace_back(c.center.x() + c.radius * std::cos(a),
                                c.center.y() + c.radius * std::sin(a), z);
    } else {
      const CylPart& c = *e.cyl;
      const double a = rng.uniform(0.0, 2.0 * M_PI);
      const double r = c.radius * std::sqrt(rng.uniform01());
      cloud.points.emplace_back(c.center.x() + r * std::cos(a), c.center.y() + r * std::sin(a),
                                e.type == 7 ? c.z1 : c.z0);
    }
  }
}

Vec3 draw_canonical_extent(const ShapeLibrary::Entry& entry, RandomStream& rng) {
  if (entry.round_base) {
    const double d = rng.uniform(entry.lo.x(), entry.hi.x());
    const double h = rng.uniform(entry.lo.z(), entry.hi.z());
    return Vec3(d, d, h);
  }
  return Vec3(rng.uniform(entry.lo.x(), entry.hi.x()), rng.uniform(entry.lo.y(), entry.hi.y()),
              rng.uniform(entry.lo.z(), entry.hi.z()));
}

SceneObject build_object(ShapeLibrary::Kind kind, const std::string& category, int id,
                         const Vec3& canonical_extent, int quarter_turns, int n_points,
                         RandomStream& rng) {
  PartSet parts = make_parts(kind, category, canonical_extent);
  rotate_parts(parts, quarter_turns);
  SceneObject obj;
  obj.id = id;
  obj.category = category;
  pin_points(parts, obj.points);
  sample_parts(parts, n_points, rng, obj.points);
  Vec3 lo, hi;
  part_bounds(parts, lo, hi);
  obj.extent = hi - lo;
  return obj;
}

Footprint translated(const Footprint& fp, const Vec2& d) {
  Footprint out = fp;
  for (Vec2& v : out.hull) v += d;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ShapeLibrary

ShapeLibrary ShapeLibrary::builtin() {
  using K = Kind;
  ShapeLibrary lib;
  auto box = [&](const char* cat, Vec3 lo, Vec3 hi) { lib.entries_[cat] = {K::Box, lo, hi, false}; };
  auto cyl = [&](const char* cat, double d0, double d1, double h0, double h1) {
    lib.entries_[cat] = {K::Cylinder, Vec3(d0, d0, h0), Vec3(d1, d1, h1), true};
  };
  auto comp = [&](const char* cat, Vec3 lo, Vec3 hi, bool round) {
    lib.entries_[cat] = {K::Composite, lo, hi, round};
  };

  comp("mug", Vec3(0.10, 0.080, 0.08), Vec3(0.13, 0.095, 0.12), false);
  cyl("cup", 0.07, 0.09, 0.09, 0.12);
  cyl("glass", 0.06, 0.08, 0.10, 0.15);
  comp("bottle", Vec3(0.06, 0.06, 0.18), Vec3(0.08, 0.08, 0.25), true);
  cyl("plate", 0.20, 0.26, 0.02, 0.03);
  cyl("bowl", 0.12, 0.16, 0.05, 0.07);
  cyl("saucer", 0.12, 0.15, 0.015, 0.02);
  box("fork", Vec3(0.18, 0.025, 0.015), Vec3(0.21, 0.040, 0.025));
  box("knife", Vec3(0.19, 0.020, 0.012), Vec3(0.23, 0.030, 0.020));
  box("spoon", Vec3(0.16, 0.030, 0.015), Vec3(0.19, 0.045, 0.025));
  box("keyboard", Vec3(0.35, 0.12, 0.02), Vec3(0.45, 0.15, 0.03));
  box("mouse", Vec3(0.095, 0.060, 0.035), Vec3(0.115, 0.075, 0.040));
  box("notebook", Vec3(0.20, 0.14, 0.010), Vec3(0.25, 0.18, 0.020));
  box("pen", Vec3(0.13, 0.012, 0.012), Vec3(0.15, 0.018, 0.018));
  box("stapler", Vec3(0.14, 0.035, 0.040), Vec3(0.18, 0.050, 0.060));
  comp("plant", Vec3(0.12, 0.12, 0.20), Vec3(0.18, 0.18, 0.30), true);
  cyl("vase", 0.08, 0.12, 0.15, 0.25);
  comp("lamp", Vec3(0.12, 0.12, 0.30), Vec3(0.16, 0.16, 0.40), true);
  return lib;
}

bool ShapeLibrary::has(const std::string& category) const { return entries_.count(category) > 0; }

const ShapeLibrary::Entry& ShapeLibrary::entry(const std::string& category) const {
  const auto it = entries_.find(category);
  if (it == entries_.end()) fail("unknown_category", "no shape entry for '" + category + "'");
  return it->second;
}

std::vector<std::string> ShapeLibrary::categories() const {
  std::vector<std::string> out;
  for (const auto& [cat, entry] : entries_) {
    (void)entry;
    out.push_back(cat);
  }
  return out;
}

Vec3 ShapeLibrary::sample_extent(const std::string& category, std::uint64_t rng_seed) const {
  const Entry& e = entry(category);
  RandomStream rng(rng_seed);
  Vec3 ext = draw_canonical_extent(e, rng);
  if (rng.uniform_int(0, 3) % 2 == 1) std::swap(ext.x(), ext.y());
  return ext;
}

SceneObject ShapeLibrary::make_object(const std::string& category, int id, std::uint64_t rng_seed,
                                      int n_points) const {
  if (n_points < 1) fail("invalid_argument", "make_object: n_points must be >= 1");
  const Entry& e = entry(category);
  RandomStream rng(rng_seed);
  const Vec3 canonical = draw_canonical_extent(e, rng);
  const int quarter = static_cast<int>(rng.uniform_int(0, 3));
  SceneObject obj = build_object(e.kind, category, id, canonical, quarter, n_points, rng);
  obj.validate();
  return obj;
}

// ---------------------------------------------------------------------------
// Instantiation

Scene instantiate(const SceneGraph& graph, const ShapeLibrary& library,
                  const Vec3& receptacle_extent, std::uint64_t rng_seed) {
  if (!(receptacle_extent.array() > 0.0).all())
    fail("invalid_argument", "instantiate: receptacle extent must be positive");
  if (!graph.nodes.empty()) graph.validate();
  for (const GraphNode& n : graph.nodes) {
    if (!library.has(n.category))
      fail("unknown_category", "instantiate: no shape entry for '" + n.category + "'");
    if (std::abs(n.centroid.x()) > receptacle_extent.x() / 2 + 1e-12 ||
        std::abs(n.centroid.y()) > receptacle_extent.y() / 2 + 1e-12)
      fail("infeasible_scene", "instantiate: node " + std::to_string(n.id) +
                                   " centroid falls outside the receptacle");
  }

  // Parents before children so "on" children can snap to the parent top.
  std::vector<int> order;
  if (!graph.nodes.empty()) {
    order.push_back(graph.root);
    for (std::size_t i = 0; i < order.size(); ++i) {
      std::vector<int> kids = graph.children_of(order[i]);
      std::sort(kids.begin(), kids.end());
      order.insert(order.end(), kids.begin(), kids.end());
    }
  }
  std::map<int, const GraphEdge*> incoming;
  for (const GraphEdge& e : graph.edges) incoming[e.child] = &e;

  Scene scene;
  std::map<int, double> top_height;  // node id -> world top of its object
  int next_id = 1;
  for (int nid : order) {
    const GraphNode* node = graph.find(nid);
    SceneObject obj = library.make_object(
        node->category, next_id++, derive_seed(rng_seed, static_cast<std::uint64_t>(nid)));
    double base = 0.0;
    const auto it = incoming.find(nid);
    if (it != incoming.end() && it->second->relation == Relation::On)
      base = top_height.at(it->second->parent);
    obj.pose = ScenePose(Vec3(node->centroid.x(), node->centroid.y(), base), 0.0);
    top_height[nid] = base + obj.extent.z();
    scene.objects.push_back(std::move(obj));
  }

  double hx = receptacle_extent.x() / 2, hy = receptacle_extent.y() / 2;
  for (const SceneObject& obj : scene.objects) {
    hx = std::max(hx, std::abs(obj.pose.t.x()) + obj.extent.x() / 2 + kFitMargin);
    hy = std::max(hy, std::abs(obj.pose.t.y()) + obj.extent.y() / 2 + kFitMargin);
  }
  const Vec3 ext(2 * hx, 2 * hy, receptacle_extent.z());
  RandomStream rng(derive_seed(rng_seed, kReceptacleSalt));
  SceneObject receptacle =
      build_object(ShapeLibrary::Kind::Box, "table", 0, ext, 0, receptacle_point_count(ext), rng);
  receptacle.pose = ScenePose(Vec3(0.0, 0.0, -ext.z()), 0.0);
  scene.receptacle = std::move(receptacle);
  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------
// Penetration and support queries

double object_penetration(const SceneObject& a, const SceneObject& b) {
  return prism_penetration(a.world_footprint(), b.world_footprint());
}

double max_scene_penetration(const Scene& scene) {
  std::vector<Footprint> fps;
  fps.reserve(scene.objects.size());
  for (const SceneObject& obj : scene.objects) fps.push_back(obj.world_footprint());
  double worst = 0.0;
  for (std::size_t i = 0; i < fps.size(); ++i)
    for (std::size_t j = i + 1; j < fps.size(); ++j)
      worst = std::max(worst, prism_penetration(fps[i], fps[j]));
  return worst;
}

std::vector<int> stacked_on(const Scene& scene, const SceneObject& base) {
  const double support = scene.support_height();
  const Footprint base_fp = base.world_footprint();
  std::vector<int> out;
  for (const SceneObject& obj : scene.objects) {
    if (obj.id == base.id) continue;
    const Footprint fp = obj.world_footprint();
    if (fp.zmin <= support + kRestTolerance) continue;  // resting, not stacked
    if (base_fp.contains_xy(fp.center()) && std::abs(fp.zmin - base_fp.zmax) <= kStackTolerance)
      out.push_back(obj.id);
  }
  return out;
}

const SceneObject* support_of(const Scene& scene, const SceneObject& obj) {
  const double support = scene.support_height();
  const Footprint fp = obj.world_footprint();
  if (fp.zmin <= support + kRestTolerance) return nullptr;
  const SceneObject* best = nullptr;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const SceneObject& cand : scene.objects) {
    if (cand.id == obj.id) continue;
    const Footprint cfp = cand.world_footprint();
    if (!cfp.contains_xy(fp.center())) continue;
    const double gap = std::abs(fp.zmin - cfp.zmax);
    if (gap <= kStackTolerance && (gap < best_gap || (gap == best_gap && cand.id < best->id))) {
      best_gap = gap;
      best = &cand;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Collision refinement

RefineResult refine_poses(const Scene& scene, int steps, double step_size, double reg_weight,
                          RefineTrace* trace) {
  if (steps < 1) fail("invalid_argument", "refine_poses: steps must be >= 1");
  if (!(step_size > 0.0)) fail("invalid_argument", "refine_poses: step_size must be positive");
  if (!(reg_weight >= 0.0)) fail("invalid_argument", "refine_poses: reg_weight must be >= 0");

  Scene work = scene;
  std::vector<int> removed;
  const int forced_removal_round = 4 * static_cast<int>(scene.objects.size()) + 4;

  for (int round = 0;; ++round) {
    std::vector<Footprint> fps;
    fps.reserve(work.objects.size());
    for (const SceneObject& obj : work.objects) fps.push_back(obj.world_footprint());

    std::size_t worst_idx = 0;
    double worst_pen = 0.0;
    for (std::size_t i = 0; i < work.objects.size(); ++i) {
      double pen = 0.0;
      for (std::size_t j = 0; j < work.objects.size(); ++j)
        if (j != i) pen = std::max(pen, prism_penetration(fps[i], fps[j]));
      if (pen > worst_pen ||
          (pen == worst_pen && pen > 0.0 && work.objects[i].id < work.objects[worst_idx].id)) {
        worst_pen = pen;
        worst_idx = i;
      }
    }
    if (worst_pen <= kPenetrationEps) break;

    SceneObject& mover = work.objects[worst_idx];
    // The mover's stack rides along with it.
    std::set<int> group{mover.id};
    std::vector<int> frontier{mover.id};
    while (!frontier.empty()) {
      const int id = frontier.back();
      frontier.pop_back();
      for (int child : stacked_on(work, *work.find(id)))
        if (group.insert(child).second) frontier.push_back(child);
    }

    std::vector<std::size_t> group_idx, other_idx;
    for (std::size_t i = 0; i < work.objects.size(); ++i)
      (group.count(work.objects[i].id) ? group_idx : other_idx).push_back(i);

    const auto group_penetration = [&](const Vec2& offset) {
      double pen = 0.0;
      for (std::size_t gi : group_idx) {
        const Footprint moved = translated(fps[gi], offset);
        for (std::size_t oi : other_idx) pen = std::max(pen, prism_penetration(moved, fps[oi]));
      }
      return pen;
    };

    Vec2 offset(0.0, 0.0);
    double current_pen = group_penetration(offset);

    if (round < forced_removal_round && !other_idx.empty()) {
      // TSDF of the frozen rest of the scene, restricted to geometry the
      // mover can reach within `steps` strides.
      const auto [mlo, mhi] = mover.world_points().aabb();
      const double reach = steps * step_size + 0.05 + 0.02;
      std::vector<PointCloud> clouds;
      for (std::size_t oi : other_idx) {
        const PointCloud pts = work.objects[oi].world_points();
        const auto [lo, hi] = pts.aabb();
        if ((lo.array() <= mhi.array() + reach).all() && (hi.array() >= mlo.array() - reach).all())
          clouds.push_back(pts);
      }
      if (!clouds.empty()) {
        const TsdfGrid grid = build_tsdf(clouds, 0.01, 0.05, 0.10);
        const PointCloud mover_pts = mover.world_points();
        const SceneObject* mover_support = support_of(work, mover);
        const Footprint* support_fp = nullptr;
        if (mover_support != nullptr)
          for (std::size_t oi : other_idx)
            if (work.objects[oi].id == mover_support->id) support_fp = &fps[oi];
        const Vec2 mover_center = fps[worst_idx].center();

        const auto objective = [&](const Vec2& off, Vec2* grad) {
          double f = -reg_weight * off.squaredNorm();
          Vec2 g = -2.0 * reg_weight * off;
          for (const Vec3& p : mover_pts.points) {
            const TsdfSample s = tsdf_query(grid, p + Vec3(off.x(), off.y(), 0.0));
            f += s.value;
            g += Vec2(s.gradient.x(), s.gradient.y());
          }
          if (grad != nullptr) *grad = g;
          return f;
        };

        Vec2 grad;
        double current_f = objective(offset, &grad);
        for (int accepted = 0; accepted < steps;) {
          const double norm = grad.norm();
          if (!(norm > 1e-12)) break;
          const Vec2 direction = grad / norm;
          bool moved = false;
          double stride = step_size;
          for (int attempt = 0; attempt < 3; ++attempt, stride /= 2) {
            const Vec2 cand = offset + stride * direction;
            const double cand_pen = group_penetration(cand);
            const double cand_f = objective(cand, nullptr);
            const bool keeps_support =
                support_fp == nullptr || support_fp->contains_xy(mover_center + cand);
            const bool accept =
                cand_f > current_f && cand_pen <= current_pen + 1e-12 && keeps_support;
            if (trace != nullptr)
              trace->steps.push_back({mover.id, current_pen, cand_pen, accept});
            if (accept) {
              offset = cand;
              current_pen = cand_pen;
              current_f = objective(offset, &grad);
              ++accepted;
              moved = true;
              break;
            }
          }
          if (!moved || current_pen == 0.0) break;
        }
      }
    }

    if (current_pen > kPenetrationEps) {
      std::vector<SceneObject> kept;
      for (SceneObject& obj : work.objects) {
        if (group.count(obj.id))
          removed.push_back(obj.id);
        else
          kept.push_back(std::move(obj));
      }
      work.objects = std::move(kept);
    } else if (offset != Vec2(0.0, 0.0)) {
      for (std::size_t gi : group_idx) {
        work.objects[gi].pose.t.x() += offset.x();
        work.objects[gi].pose.t.y() += offset.y();
      }
    }
  }

  std::sort(removed.begin(), removed.end());
  work.validate();
  return {std::move(work), std::move(removed)};
}

// ---------------------------------------------------------------------------
// Labeled samples

LabeledSample make_sample(const Scene& scene, int n_plans, std::uint64_t rng_seed) {
  if (n_plans < 1) fail("invalid_argument", "make_sample: n_plans must be >= 1");
  if (scene.objects.size() < static_cast<std::size_t>(n_plans) + 1)
    fail("too_few_objects", "make_sample: scene needs at least n_plans + 1 objects");
  const double viewer_yaw = scene.viewer_yaw();

  struct Candidate {
    std::size_t index;
    std::vector<int> anchors;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    if (!stacked_on(scene, obj).empty()) continue;  // removing it would strand its stack
    std::vector<int> anchors;
    if (const SceneObject* sup = support_of(scene, obj)) {
      anchors.push_back(sup->id);
    } else {
      const Vec2 center = obj.world_footprint().center();
      const double r_subject = footprint_radius(obj.extent);
      for (const SceneObject& anchor : scene.objects) {
        if (anchor.id == obj.id) continue;
        const double r_anchor = footprint_radius(anchor.extent);
        const double dist = (anchor.world_footprint().center() - center).norm();
        // The annotation radial band; anchors outside it would make the
        // ground truth fail its own region check.
        if (dist >= r_anchor + r_subject && dist <= r_anchor + 4.0 * r_subject)
          anchors.push_back(anchor.id);
      }
      std::sort(anchors.begin(), anchors.end());
    }
    if (anchors.size() >= static_cast<std::size_t>(n_plans)) candidates.push_back({i, anchors});
  }
  if (candidates.empty())
    fail("infeasible_sample", "make_sample: no object has enough region-consistent anchors");

  RandomStream rng(rng_seed);
  const Candidate& chosen =
      candidates[rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1)];
  const SceneObject dropped = scene.objects[chosen.index];

  std::vector<int> anchors = chosen.anchors;
  rng.shuffle(anchors);
  anchors.resize(n_plans);

  LabeledSample sample;
  sample.scene = scene;
  sample.scene.objects.erase(sample.scene.objects.begin() +
                             static_cast<std::ptrdiff_t>(chosen.index));
  sample.dropped_object = dropped;
  sample.gt_pose = dropped.pose.as_pose();
  for (int anchor_id : anchors) {
    const SceneObject* anchor = scene.find(anchor_id);
    StructuredPlan plan;
    plan.anchor_id = anchor_id;
    plan.anchor_category = anchor->category;
    plan.anchor_position = anchor->pose.t;
    plan.direction = classify_relation(*anchor, dropped, viewer_yaw);
    sample.plans.push_back(std::move(plan));
  }
  const SceneObject* sup = support_of(scene, dropped);
  const SceneObject* on_anchor = sup != nullptr ? sample.scene.find(sup->id) : nullptr;
  sample.gt_map = gt_affordance(sample.scene, sample.gt_pose, dropped.extent, 1.0, on_anchor);
  return sample;
}

void save_sample(const LabeledSample& sample, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_scene(sample.scene, dir + "/scene.json", dir);
  save_plans(sample.plans, dir + "/plans.json");
  json j;
  j["schema_version"] = 1;
  j["dropped_object"] = detail::object_json(sample.dropped_object, dir, "", "dropped.ply");
  json pose;
  pose["t"] = vec3_json(sample.gt_pose.t);
  pose["yaw"] = sample.gt_pose.yaw;
  j["gt_pose"] = std::move(pose);
  json map;
  map["reference"] = sample.gt_map.reference;
  map["activations"] = sample.gt_map.activations;
  j["gt_affordance"] = std::move(map);
  save_json_file(j, dir + "/gt.json", "save_sample");
}

LabeledSample load_sample(const std::string& dir) {
  LabeledSample sample;
  sample.scene = load_scene(dir + "/scene.json");
  sample.plans = load_plans(dir + "/plans.json");
  const json j = load_json_file(dir + "/gt.json", "load_sample");
  check_keys(j, {"schema_version", "dropped_object", "gt_pose", "gt_affordance"}, {},
             "sample.gt");
  check_schema_version(j, 1, "sample.gt");
  sample.dropped_object =
      detail::object_from_json(j.at("dropped_object"), dir + "/", "sample.gt.dropped_object");
  const json& pj = j.at("gt_pose");
  check_keys(pj, {"t", "yaw"}, {}, "sample.gt.gt_pose");
  sample.gt_pose = Pose(vec3_from(pj.at("t"), "sample.gt.gt_pose.t"), pj.at("yaw").get<double>());
  const json& mj = j.at("gt_affordance");
  check_keys(mj, {"reference", "activations"}, {}, "sample.gt.gt_affordance");
  sample.gt_map.reference = mj.at("reference").get<std::string>();
  for (const json& a : mj.at("activations"))
    sample.gt_map.activations.push_back(a.get<double>());
  sample.gt_map.validate(sample.scene.scene_cloud().size());
  return sample;
}

}  // namespace placekit
