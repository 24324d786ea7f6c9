// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "placekit/common.hpp"

namespace placekit {

/// Rigid placement transform restricted to translation + rotation about the
/// gravity axis (+z). This is the variable the planner diffuses over.
/// Invariant: yaw wrapped to [-pi, pi).
struct Pose {
  Vec3 t{0.0, 0.0, 0.0};
  double yaw = 0.0;

  Pose() = default;
  Pose(const Vec3& translation, double yaw_radians)
      : t(translation), yaw(wrap_angle(yaw_radians)) {}

  Mat3 rotation() const;
  Vec3 apply(const Vec3& p) const;
  static Pose identity() { return Pose(); }
};

/// Unordered 3D point set; optional per-point activation channel in [0,1]
/// (empty or exactly one value per point).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> activations;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void require_valid(const std::string& what) const;
  std::pair<Vec3, Vec3> aabb() const;
  PointCloud transformed(const Pose& pose) const;
};

/// Pinhole camera parameters. Invariants: fx, fy > 0; cx in (0, width),
/// cy in (0, height).
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  void validate() const;
};

/// One 3D point per valid depth pixel via the pinhole model. Zero/NaN depth
/// pixels are invalid and dropped; all-invalid input is an error.
PointCloud backproject(const Eigen::MatrixXd& depth, const CameraIntrinsics& intrinsics);

/// Component-wise median (even counts average the middle pair).
Vec3 robust_centroid(const PointCloud& cloud);

/// Exact nearest-neighbor index over a fixed point set. Median-split k-d
/// tree; results are guaranteed to equal a brute-force scan.
class KdTree {
public:
  struct Hit {
    std::size_t index = 0;
    double dist2 = 0.0;
  };

  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points);

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  Hit nearest(const Vec3& query) const;
  const Vec3& point(std::size_t index) const { return pts_[index]; }

private:
  struct Node {
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t index = 0;
    std::uint8_t axis = 0;
  };
  std::int32_t build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi);
  void search(std::int32_t node, const Vec3& q, Hit& best) const;
  std::vector<Vec3> pts_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Exact per-query nearest-neighbor Euclidean distance into `target`.
std::vector<double> nn_distance(const PointCloud& query_points, const PointCloud& target);

/// Horizontal convex hull of a point set plus its height interval; the
/// occupancy proxy used for the TSDF inside test and penetration checks.
/// Hull is CCW; degenerate hulls (1-2 vertices) are permitted.
struct Footprint {
  std::vector<Vec2> hull;
  double zmin = 0.0, zmax = 0.0;

  static Footprint of(const std::vector<Vec3>& points);
  /// True when `p` lies inside the hull with every edge pushed inward by
  /// `inset` meters (inset 0 = plain containment, boundary inclusive).
  bool contains_xy(const Vec2& p, double inset = 0.0) const;
  /// Center of the hull's bounding box.
  Vec2 center() const;
  double radius() const;
};

/// CCW convex hull (Andrew monotone chain); collinear points dropped.
std::vector<Vec2> convex_hull_2d(std::vector<Vec2> points);

/// Minimal translation distance separating two convex footprint prisms:
/// 0 when interiors are disjoint, otherwise the smallest displacement along
/// any hull edge normal or the vertical axis that clears the overlap.
double prism_penetration(const Footprint& a, const Footprint& b);

/// Axis-aligned voxel grid of truncated signed distances. values is
/// row-major with x slowest, z fastest; nodes sit at
/// origin + (i,j,k)*voxel_size. Invariant: |value| <= truncation.
struct TsdfGrid {
  Vec3 origin{0.0, 0.0, 0.0};
  double voxel_size = 0.01;
  std::array<int, 3> dims{0, 0, 0};
  double truncation = 0.05;
  std::vector<float> values;

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
  double value_at(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }
  /// Upper corner of the node lattice.
  Vec3 max_corner() const;
};

struct TsdfSample {
  double value = 0.0;
  Vec3 gradient{0.0, 0.0, 0.0};
};

/// Builds a TSDF from object surface clouds: per-voxel unsigned distance to
/// the union point set (exact nearest neighbor), negated inside any object's
/// footprint-hull/height occupancy, clamped to +-truncation. Grid covers the
/// union AABB expanded by `padding` (must be >= truncation).
TsdfGrid build_tsdf(const std::vector<PointCloud>& object_clouds, double voxel_size = 0.01,
                    double truncation = 0.05, double padding = 0.10);

/// Trilinear value and the interpolant's exact gradient. Out-of-bounds
/// queries return (+truncation, zero gradient).
TsdfSample tsdf_query(const TsdfGrid& grid, const Vec3& p);

/// Ascii PLY export/import (properties x y z, optional activation).
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

/// Grid export: JSON header (origin, dims, voxel_size, truncation) plus a
/// row-major float32 binary payload referenced by the header.
void write_tsdf(const TsdfGrid& grid, const std::string& header_path,
                const std::string& payload_path);
TsdfGrid read_tsdf(const std::string& header_path);

/// Shortest decimal string that round-trips the double exactly.
std::string fmt_double(double v);

}  // namespace placekit
