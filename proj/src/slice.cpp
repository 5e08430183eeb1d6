#include "tendonforge/slice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace tendonforge {

namespace {

constexpr double kWeldTol = 1e-9;    // endpoint welding grid for stitching
constexpr double kMinSegment = 1e-12;
constexpr double kMinArea = 1e-12;

struct Key3 {
  long long x, y, z;
  bool operator==(const Key3&) const = default;
};

struct Key3Hash {
  size_t operator()(const Key3& k) const {
    size_t h = std::hash<long long>()(k.x);
    h = h * 1000003u ^ std::hash<long long>()(k.y);
    h = h * 1000003u ^ std::hash<long long>()(k.z);
    return h;
  }
};

Key3 quantize(const Vec3& p) {
  return {static_cast<long long>(std::llround(p.x() / kWeldTol)),
          static_cast<long long>(std::llround(p.y() / kWeldTol)),
          static_cast<long long>(std::llround(p.z() / kWeldTol))};
}

struct Segment {
  Vec3 a, b;
};

// Plane/triangle intersection. Vertices exactly on the plane count as the
// positive side so each crossing triangle yields exactly one segment and no
// divisions by zero occur. Segments are oriented along cross(axis, normal),
// which makes stitched loops wind counter-clockwise around solid material
// when viewed from +axis.
void slice_triangles(const TriMesh& mesh, const Vec3& axis, double offset,
                     std::vector<Segment>& out) {
  for (const auto& f : mesh.faces) {
    const Vec3& v0 = mesh.vertices[f[0]];
    const Vec3& v1 = mesh.vertices[f[1]];
    const Vec3& v2 = mesh.vertices[f[2]];
    double d0 = axis.dot(v0) - offset;
    double d1 = axis.dot(v1) - offset;
    double d2 = axis.dot(v2) - offset;
    bool s0 = d0 >= 0.0, s1 = d1 >= 0.0, s2 = d2 >= 0.0;
    if (s0 == s1 && s1 == s2) continue;

    const Vec3* verts[3] = {&v0, &v1, &v2};
    double dist[3] = {d0, d1, d2};
    bool side[3] = {s0, s1, s2};
    Vec3 pts[2];
    int n_pts = 0;
    for (int e = 0; e < 3 && n_pts < 2; ++e) {
      int ea = e, eb = (e + 1) % 3;
      if (side[ea] == side[eb]) continue;
      double t = dist[ea] / (dist[ea] - dist[eb]);
      pts[n_pts++] = *verts[ea] + t * (*verts[eb] - *verts[ea]);
    }
    if (n_pts != 2) continue;
    if ((pts[1] - pts[0]).norm() < kMinSegment) continue;

    Vec3 normal = (v1 - v0).cross(v2 - v0);
    Vec3 along = axis.cross(normal);
    if (along.squaredNorm() < 1e-30) continue;  // triangle parallel to the plane
    if (along.dot(pts[1] - pts[0]) < 0.0) std::swap(pts[0], pts[1]);
    out.push_back({pts[0], pts[1]});
  }
}

// Chains directed segments into loops by welding endpoints on a 1e-9 m grid.
// A chain that fails to close (open surface, cracks) is closed by connecting
// its last point back to its first and the contour is flagged.
void stitch(const std::vector<Segment>& segments, SliceContour& contour) {
  const int n = static_cast<int>(segments.size());
  std::unordered_multimap<Key3, int, Key3Hash> by_start;
  by_start.reserve(segments.size());
  for (int i = 0; i < n; ++i) by_start.emplace(quantize(segments[i].a), i);
  std::vector<bool> used(n, false);

  auto take_from = [&](const Vec3& point) -> int {
    auto [lo, hi] = by_start.equal_range(quantize(point));
    int best = -1;
    for (auto it = lo; it != hi; ++it)
      if (!used[it->second] && (best < 0 || it->second < best)) best = it->second;
    return best;
  };

  for (int start = 0; start < n; ++start) {
    if (used[start]) continue;
    std::vector<Vec3> loop;
    used[start] = true;
    loop.push_back(segments[start].a);
    loop.push_back(segments[start].b);
    Key3 home = quantize(segments[start].a);
    bool closed = false;
    while (true) {
      int next = take_from(loop.back());
      if (next < 0) break;
      used[next] = true;
      if (quantize(segments[next].b) == home) {
        closed = true;
        break;
      }
      loop.push_back(segments[next].b);
    }
    if (!closed) contour.closed_open_chain = true;

    // Collapse welded duplicates (including a duplicated closing point).
    std::vector<Vec3> clean;
    for (const auto& p : loop)
      if (clean.empty() || quantize(clean.back()) != quantize(p)) clean.push_back(p);
    while (clean.size() > 1 && quantize(clean.front()) == quantize(clean.back()))
      clean.pop_back();
    if (clean.size() >= 3) contour.loops.push_back(std::move(clean));
  }
}

// Right-handed in-plane frame (u, v, axis); the (u, v) chart preserves the
// orientation of loops about +axis.
void plane_frame(const Vec3& axis, Vec3& u, Vec3& v) {
  int smallest = 0;
  axis.cwiseAbs().minCoeff(&smallest);
  Vec3 e = Vec3::Zero();
  e[smallest] = 1.0;
  u = axis.cross(e).normalized();
  v = axis.cross(u);
}

Vec3 unit_axis(const Vec3& axis) {
  double n = axis.norm();
  if (!(n > 1e-12) || !axis.allFinite())
    throw InputError("slicing axis must be a nonzero finite vector");
  return axis / n;
}

}  // namespace

std::pair<double, double> axis_extent(const TriMesh& mesh, const Vec3& axis) {
  validate_mesh(mesh);
  Vec3 a = unit_axis(axis);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : mesh.vertices) {
    double d = a.dot(p);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

std::vector<SliceContour> slice_mesh_at(const TriMesh& mesh, const Vec3& axis,
                                        const std::vector<double>& offsets) {
  validate_mesh(mesh);
  Vec3 a = unit_axis(axis);
  std::vector<SliceContour> result;
  std::vector<Segment> segments;
  for (double offset : offsets) {
    segments.clear();
    slice_triangles(mesh, a, offset, segments);
    if (segments.empty()) continue;
    SliceContour contour;
    contour.plane_offset = offset;
    contour.axis = a;
    stitch(segments, contour);
    if (!contour.loops.empty()) result.push_back(std::move(contour));
  }
  return result;
}

std::vector<SliceContour> slice_mesh(const TriMesh& mesh, const Vec3& axis,
                                     int n_slices) {
  if (n_slices < 2) throw InputError("n_slices must be at least 2");
  auto [lo, hi] = axis_extent(mesh, axis);
  double extent = hi - lo;
  if (extent < 1e-9) throw InputError("axis-degenerate mesh: extent below 1e-9 m");
  double nudge = 1e-6 * extent;
  double first = lo + nudge, last = hi - nudge;
  std::vector<double> offsets(n_slices);
  for (int i = 0; i < n_slices; ++i)
    offsets[i] = first + (last - first) * i / (n_slices - 1);
  return slice_mesh_at(mesh, axis, offsets);
}

CentroidResult contour_centroid(const SliceContour& contour) {
  if (contour.loops.empty()) throw InputError("centroid of an empty contour");
  Vec3 u, v;
  plane_frame(contour.axis, u, v);

  double total_area = 0.0;
  Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
  for (const auto& loop : contour.loops) {
    double area2 = 0.0;  // twice the signed area
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    const size_t m = loop.size();
    for (size_t i = 0; i < m; ++i) {
      const Vec3& p0 = loop[i];
      const Vec3& p1 = loop[(i + 1) % m];
      Eigen::Vector2d a0(u.dot(p0), v.dot(p0));
      Eigen::Vector2d a1(u.dot(p1), v.dot(p1));
      double cross = a0.x() * a1.y() - a1.x() * a0.y();
      area2 += cross;
      c += (a0 + a1) * cross;
    }
    total_area += 0.5 * area2;
    weighted += c / 6.0;  // = area * loop_centroid
  }

  CentroidResult out;
  if (std::abs(total_area) < kMinArea) {
    // Degenerate contour: fall back to the plain vertex average.
    out.degenerate = true;
    Vec3 sum = Vec3::Zero();
    size_t count = 0;
    for (const auto& loop : contour.loops)
      for (const auto& p : loop) {
        sum += p;
        ++count;
      }
    out.point = sum / static_cast<double>(count);
    return out;
  }
  Eigen::Vector2d c2 = weighted / total_area;
  out.point = u * c2.x() + v * c2.y() + contour.axis * contour.plane_offset;
  return out;
}

nlohmann::ordered_json slice_dump(const std::vector<SliceContour>& contours) {
  nlohmann::ordered_json j;
  Vec3 axis = contours.empty() ? Vec3::UnitX() : contours.front().axis;
  j["axis"] = {axis.x(), axis.y(), axis.z()};
  auto offsets = nlohmann::ordered_json::array();
  auto centroids = nlohmann::ordered_json::array();
  for (const auto& c : contours) {
    offsets.push_back(c.plane_offset);
    Vec3 p = contour_centroid(c).point;
    centroids.push_back({p.x(), p.y(), p.z()});
  }
  j["offsets"] = std::move(offsets);
  j["centroids"] = std::move(centroids);
  return j;
}

}  // namespace tendonforge
