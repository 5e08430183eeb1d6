#pragma once

#include <json.hpp>
#include <vector>

#include "tendonforge/mesh.hpp"

namespace tendonforge {

// One cross-section of a mesh. Every loop point satisfies
// dot(p, axis) == plane_offset to within 1e-9 m. Loops inherit the mesh
// orientation: viewed from +axis, solid regions wind counter-clockwise,
// holes clockwise, so signed areas combine correctly.
struct SliceContour {
  double plane_offset = 0.0;
  Vec3 axis = Vec3::UnitX();
  std::vector<std::vector<Vec3>> loops;  // closed polygons, >= 3 points each
  bool closed_open_chain = false;        // an unclosed segment chain was forced shut
};

// Cross-sections at explicit plane offsets (dot(p, axis) = offset).
// Planes that intersect nothing are omitted from the result.
std::vector<SliceContour> slice_mesh_at(const TriMesh& mesh, const Vec3& axis,
                                        const std::vector<double>& offsets);

// n_slices planes equally spaced over the mesh extent along axis, endpoints
// nudged inward by 1e-6 of the extent so both boundary planes cut geometry.
// Throws InputError("axis-degenerate mesh") when the extent is below 1e-9 m.
std::vector<SliceContour> slice_mesh(const TriMesh& mesh, const Vec3& axis,
                                     int n_slices);

struct CentroidResult {
  Vec3 point = Vec3::Zero();
  bool degenerate = false;  // enclosed area below 1e-12, vertex average used
};

// Signed-area-weighted centroid over all loops of the contour.
CentroidResult contour_centroid(const SliceContour& contour);

// {axis, offsets, centroids} dump for downstream tooling.
nlohmann::ordered_json slice_dump(const std::vector<SliceContour>& contours);

// Mesh extent along a direction; used to pick slice counts.
std::pair<double, double> axis_extent(const TriMesh& mesh, const Vec3& axis);

}  // namespace tendonforge
