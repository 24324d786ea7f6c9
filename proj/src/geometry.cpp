// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace placekit {

using json = nlohmann::ordered_json;

Mat3 Pose::rotation() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Vec3 Pose::apply(const Vec3& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * p.x() - s * p.y() + t.x(), s * p.x() + c * p.y() + t.y(), p.z() + t.z());
}

void PointCloud::require_valid(const std::string& what) const {
  if (points.empty()) fail("empty_cloud", what + ": point cloud is empty");
  for (const Vec3& p : points)
    if (!p.allFinite()) fail("invalid_argument", what + ": point cloud has non-finite coordinates");
  if (!activations.empty() && activations.size() != points.size())
    fail("invalid_argument", what + ": activation channel length mismatch");
}

std::pair<Vec3, Vec3> PointCloud::aabb() const {
  require_valid("aabb");
  Vec3 lo = points.front(), hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

PointCloud PointCloud::transformed(const Pose& pose) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const Vec3& p : points) out.points.push_back(pose.apply(p));
  out.activations = activations;
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail("invalid_argument", "intrinsics: focal lengths must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    fail("invalid_argument", "intrinsics: principal point outside the image");
}

PointCloud backproject(const Eigen::MatrixXd& depth, const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  if (depth.rows() != intrinsics.height || depth.cols() != intrinsics.width)
    fail("invalid_argument", "backproject: depth dimensions do not match intrinsics");
  PointCloud cloud;
  for (int v = 0; v < depth.rows(); ++v) {
    for (int u = 0; u < depth.cols(); ++u) {
      const double d = depth(v, u);
      if (!std::isfinite(d) || d <= 0.0) continue;
      cloud.points.emplace_back((u - intrinsics.cx) / intrinsics.fx * d,
                                (v - intrinsics.cy) / intrinsics.fy * d, d);
    }
  }
  if (cloud.empty()) fail("empty_cloud", "backproject: no valid depth pixels");
  return cloud;
}

Vec3 robust_centroid(const PointCloud& cloud) {
  cloud.require_valid("robust_centroid");
  Vec3 out;
  std::vector<double> axis(cloud.size());
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < cloud.size(); ++i) axis[i] = cloud.points[i][a];
    std::sort(axis.begin(), axis.end());
    const std::size_t n = axis.size();
    out[a] = (n % 2 == 1) ? axis[n / 2] : 0.5 * (axis[n / 2 - 1] + axis[n / 2]);
  }
  return out;
}

KdTree::KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
  if (pts_.empty()) return;
  std::vector<std::uint32_t> idx(pts_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  nodes_.reserve(pts_.size());
  root_ = build(idx, 0, idx.size());
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi) {
  if (lo >= hi) return -1;
  Vec3 bmin = pts_[idx[lo]], bmax = pts_[idx[lo]];
  for (std::size_t i = lo; i < hi; ++i) {
    bmin = bmin.cwiseMin(pts_[idx[i]]);
    bmax = bmax.cwiseMax(pts_[idx[i]]);
  }
  int axis = 0;
  const Vec3 span = bmax - bmin;
  if (span.y() > span.x()) axis = 1;
  if (span.z() > span[axis]) axis = 2;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                     return a < b;
                   });
  Node node;
  node.index = idx[mid];
  node.axis = static_cast<std::uint8_t>(axis);
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  const std::int32_t left = build(idx, lo, mid);
  const std::int32_t right = build(idx, mid + 1, hi);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  if (empty()) fail("empty_cloud", "KdTree::nearest on empty tree");
  Hit best;
  best.dist2 = std::numeric_limits<double>::infinity();
  search(root_, query, best);
  return best;
}

void KdTree::search(std::int32_t node, const Vec3& q, Hit& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Vec3& p = pts_[n.index];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best.dist2) {
    best.dist2 = d2;
    best.index = n.index;
  }
  const double delta = q[n.axis] - p[n.axis];
  const std::int32_t near = delta < 0.0 ? n.left : n.right;
  const std::int32_t far = delta < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (delta * delta < best.dist2) search(far, q, best);
}

std::vector<double> nn_distance(const PointCloud& query_points, const PointCloud& target) {
  query_points.require_valid("nn_distance query");
  target.require_valid("nn_distance target");
  const KdTree tree(target.points);
  std::vector<double> out;
  out.reserve(query_points.size());
  for (const Vec3& q : query_points.points) out.push_back(std::sqrt(tree.nearest(q).dist2));
  return out;
}

std::vector<Vec2> convex_hull_2d(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vec2& a, const Vec2& b) { return a == b; }),
               points.end());
  const std::size_t n = points.size();
  if (n <= 2) return points;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

Footprint Footprint::of(const std::vector<Vec3>& points) {
  if (points.empty()) fail("empty_cloud", "Footprint::of: empty point set");
  Footprint fp;
  std::vector<Vec2> xy;
  xy.reserve(points.size());
  fp.zmin = fp.zmax = points.front().z();
  for (const Vec3& p : points) {
    xy.emplace_back(p.x(), p.y());
    fp.zmin = std::min(fp.zmin, p.z());
    fp.zmax = std::max(fp.zmax, p.z());
  }
  fp.hull = convex_hull_2d(std::move(xy));
  return fp;
}

bool Footprint::contains_xy(const Vec2& p, double inset) const {
  if (hull.size() < 3) {
    if (inset > 0.0) return false;
    if (hull.size() == 1) return (p - hull[0]).norm() <= 1e-12;
    if (hull.size() == 2) {
      const Vec2 d = hull[1] - hull[0];
      const double len2 = d.squaredNorm();
      if (len2 == 0.0) return (p - hull[0]).norm() <= 1e-12;
      const double s = std::clamp((p - hull[0]).dot(d) / len2, 0.0, 1.0);
      return (p - (hull[0] + s * d)).norm() <= 1e-12;
    }
    return false;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const Vec2 e = b - a;
    const double len = e.norm();
    if (len < 1e-15) continue;
    // CCW hull: interior is to the left; signed distance from the edge line.
    const double sd = (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x())) / len;
    if (sd < inset) return false;
  }
  return true;
}

Vec2 Footprint::center() const {
  if (hull.empty()) fail("empty_cloud", "Footprint::center: empty hull");
  Vec2 lo = hull[0], hi = hull[0];
  for (const Vec2& p : hull) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return 0.5 * (lo + hi);
}

double Footprint::radius() const {
  const Vec2 c = center();
  double r = 0.0;
  for (const Vec2& p : hull) r = std::max(r, (p - c).norm());
  return r;
}

namespace {

void project_hull(const std::vector<Vec2>& hull, const Vec2& axis, double& lo, double& hi) {
  lo = hi = hull[0].dot(axis);
  for (const Vec2& p : hull) {
    const double v = p.dot(axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

void collect_axes(const std::vector<Vec2>& hull, std::vector<Vec2>& axes) {
  const std::size_t n = hull.size();
  if (n < 2) return;
  const std::size_t edges = (n == 2) ? 1 : n;
  for (std::size_t i = 0; i < edges; ++i) {
    const Vec2 e = hull[(i + 1) % n] - hull[i];
    const double len = e.norm();
    if (len < 1e-15) continue;
    axes.emplace_back(-e.y() / len, e.x() / len);
    if (n == 2) axes.emplace_back(e.x() / len, e.y() / len);
  }
}

}  // namespace

double prism_penetration(const Footprint& a, const Footprint& b) {
  const double pen_z = std::min(a.zmax - b.zmin, b.zmax - a.zmin);
  if (pen_z <= 0.0) return 0.0;
  if (a.hull.empty() || b.hull.empty()) return 0.0;
  std::vector<Vec2> axes;
  collect_axes(a.hull, axes);
  collect_axes(b.hull, axes);
  if (axes.empty()) axes.emplace_back(1.0, 0.0);
  double pen_xy = std::numeric_limits<double>::infinity();
  for (const Vec2& axis : axes) {
    double alo, ahi, blo, bhi;
    project_hull(a.hull, axis, alo, ahi);
    project_hull(b.hull, axis, blo, bhi);
    const double pen_axis = std::min(ahi - blo, bhi - alo);
    if (pen_axis <= 0.0) return 0.0;
    pen_xy = std::min(pen_xy, pen_axis);
  }
  return std::min(pen_xy, pen_z);
}

Vec3 TsdfGrid::max_corner() const {
  return origin + voxel_size * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1);
}

TsdfGrid build_tsdf(const std::vector<PointCloud>& object_clouds, double voxel_size,
                    double truncation, double padding) {
  if (!(voxel_size > 0.0)) fail("invalid_argument", "build_tsdf: voxel_size must be positive");
  if (truncation < 2.0 * voxel_size)
    fail("invalid_argument", "build_tsdf: truncation must be at least 2*voxel_size");
  if (padding < truncation) fail("invalid_argument", "build_tsdf: padding must be >= truncation");

  std::vector<Vec3> all;
  struct Occupancy {
    Footprint fp;
  };
  std::vector<Occupancy> occ;
  for (const PointCloud& cloud : object_clouds) {
    if (cloud.empty()) continue;
    cloud.require_valid("build_tsdf");
    all.insert(all.end(), cloud.points.begin(), cloud.points.end());
    occ.push_back({Footprint::of(cloud.points)});
  }
  if (all.empty()) fail("empty_cloud", "build_tsdf: no input points");

  Vec3 lo = all.front(), hi = all.front();
  for (const Vec3& p : all) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= padding;
  hi.array() += padding;

  TsdfGrid grid;
  grid.voxel_size = voxel_size;
  grid.truncation = truncation;
  grid.origin = lo;
  std::size_t total = 1;
  for (int a = 0; a < 3; ++a) {
    grid.dims[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / voxel_size)) + 2;
    total *= static_cast<std::size_t>(grid.dims[a]);
  }
  if (total > (std::size_t{64} << 20))
    fail("invalid_argument", "build_tsdf: grid exceeds 64M voxels");

  const KdTree tree(all);
  // The occupancy hull is pulled inward by a quarter voxel so the signed
  // field stays near-Lipschitz across the surface shell.
  const double inset = 0.25 * voxel_size;
  grid.values.resize(total);
  std::size_t flat = 0;
  for (int ix = 0; ix < grid.dims[0]; ++ix) {
    const double x = grid.origin.x() + ix * voxel_size;
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      const double y = grid.origin.y() + iy * voxel_size;
      for (int iz = 0; iz < grid.dims[2]; ++iz, ++flat) {
        const double z = grid.origin.z() + iz * voxel_size;
        const Vec3 p(x, y, z);
        double d = std::sqrt(tree.nearest(p).dist2);
        if (d < truncation) {
          for (const Occupancy& o : occ) {
            if (z >= o.fp.zmin + inset && z <= o.fp.zmax - inset &&
                o.fp.contains_xy(Vec2(x, y), inset)) {
              d = -d;
              break;
            }
          }
        }
        grid.values[flat] = static_cast<float>(std::clamp(d, -truncation, truncation));
      }
    }
  }
  return grid;
}

TsdfSample tsdf_query(const TsdfGrid& grid, const Vec3& p) {
  TsdfSample out;
  out.value = grid.truncation;
  if (grid.values.empty()) return out;
  Vec3 g = (p - grid.origin) / grid.voxel_size;
  for (int a = 0; a < 3; ++a)
    if (g[a] < 0.0 || g[a] > grid.dims[a] - 1) return out;
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::min(static_cast<int>(g[a]), grid.dims[a] - 2);
    f[a] = g[a] - i0[a];
  }
  double c[2][2][2];
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz)
        c[dx][dy][dz] = grid.value_at(i0[0] + dx, i0[1] + dy, i0[2] + dz);

  const double wx[2] = {1.0 - f[0], f[0]};
  const double wy[2] = {1.0 - f[1], f[1]};
  const double wz[2] = {1.0 - f[2], f[2]};
  double value = 0.0;
  Vec3 grad(0.0, 0.0, 0.0);
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const double v = c[dx][dy][dz];
        value += v * wx[dx] * wy[dy] * wz[dz];
        grad.x() += v * (dx == 1 ? 1.0 : -1.0) * wy[dy] * wz[dz];
        grad.y() += v * wx[dx] * (dy == 1 ? 1.0 : -1.0) * wz[dz];
        grad.z() += v * wx[dx] * wy[dy] * (dz == 1 ? 1.0 : -1.0);
      }
  out.value = value;
  out.gradient = grad / grid.voxel_size;
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_ply(const std::string& path, const PointCloud& cloud) {
  cloud.require_valid("write_ply");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "write_ply: cannot open " + path);
  const bool with_act = !cloud.activations.empty();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (with_act) out << "property double activation\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << fmt_double(p.x()) << ' ' << fmt_double(p.y()) << ' ' << fmt_double(p.z());
    if (with_act) out << ' ' << fmt_double(cloud.activations[i]);
    out << '\n';
  }
  if (!out) fail("io_error", "write_ply: write failed for " + path);
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io_error", "read_ply: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") fail("io_error", "read_ply: not a PLY file: " + path);
  std::size_t count = 0;
  std::vector<std::string> props;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (tok == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") fail("io_error", "read_ply: unsupported element " + name);
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    } else if (tok == "comment" || tok == "obj_info") {
      continue;
    }
  }
  if (!ascii) fail("io_error", "read_ply: only ascii PLY is supported");
  int xi = -1, yi = -1, zi = -1, ai = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i] == "x") xi = static_cast<int>(i);
    if (props[i] == "y") yi = static_cast<int>(i);
    if (props[i] == "z") zi = static_cast<int>(i);
    if (props[i] == "activation") ai = static_cast<int>(i);
  }
  if (xi < 0 || yi < 0 || zi < 0) fail("io_error", "read_ply: missing x/y/z properties");
  PointCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> row(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) fail("io_error", "read_ply: truncated file " + path);
    std::istringstream ls(line);
    for (double& v : row)
      if (!(ls >> v)) fail("io_error", "read_ply: malformed vertex line in " + path);
    cloud.points.emplace_back(row[xi], row[yi], row[zi]);
    if (ai >= 0) cloud.activations.push_back(row[ai]);
  }
  cloud.require_valid("read_ply");
  return cloud;
}

void write_tsdf(const TsdfGrid& grid, const std::string& header_path,
                const std::string& payload_path) {
  {
    std::ofstream bin(payload_path, std::ios::binary);
    if (!bin) fail("io_error", "write_tsdf: cannot open " + payload_path);
    bin.write(reinterpret_cast<const char*>(grid.values.data()),
              static_cast<std::streamsize>(grid.values.size() * sizeof(float)));
    if (!bin) fail("io_error", "write_tsdf: write failed for " + payload_path);
  }
  json header;
  header["schema_version"] = 1;
  header["origin"] = {grid.origin.x(), grid.origin.y(), grid.origin.z()};
  header["dims"] = {grid.dims[0], grid.dims[1], grid.dims[2]};
  header["voxel_size"] = grid.voxel_size;
  header["truncation"] = grid.truncation;
  std::string payload_name = payload_path;
  if (const auto slash = payload_name.find_last_of('/'); slash != std::string::npos)
    payload_name = payload_name.substr(slash + 1);
  header["payload"] = payload_name;
  header["dtype"] = "float32";
  header["order"] = "row-major";
  std::ofstream out(header_path, std::ios::binary);
  if (!out) fail("io_error", "write_tsdf: cannot open " + header_path);
  out << header.dump(2) << '\n';
}

TsdfGrid read_tsdf(const std::string& header_path) {
  std::ifstream in(header_path);
  if (!in) fail("io_error", "read_tsdf: cannot open " + header_path);
  json header;
  try {
    in >> header;
  } catch (const std::exception& e) {
    fail("io_error", std::string("read_tsdf: bad header JSON: ") + e.what());
  }
  TsdfGrid grid;
  grid.origin = Vec3(header.at("origin").at(0).get<double>(), header.at("origin").at(1).get<double>(),
                     header.at("origin").at(2).get<double>());
  grid.dims = {header.at("dims").at(0).get<int>(), header.at("dims").at(1).get<int>(),
               header.at("dims").at(2).get<int>()};
  grid.voxel_size = header.at("voxel_size").get<double>();
  grid.truncation = header.at("truncation").get<double>();
  std::string dir;
  if (const auto slash = header_path.find_last_of('/'); slash != std::string::npos)
    dir = header_path.substr(0, slash + 1);
  const std::string payload_path = dir + header.at("payload").get<std::string>();
  std::ifstream bin(payload_path, std::ios::binary);
  if (!bin) fail("io_error", "read_tsdf: cannot open " + payload_path);
  const std::size_t total = static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2];
  grid.values.resize(total);
  bin.read(reinterpret_cast<char*>(grid.values.data()),
           static_cast<std::streamsize>(total * sizeof(float)));
  if (static_cast<std::size_t>(bin.gcount()) != total * sizeof(float))
    fail("io_error", "read_tsdf: payload size mismatch in " + payload_path);
  return grid;
}

}  // namespace placekit
