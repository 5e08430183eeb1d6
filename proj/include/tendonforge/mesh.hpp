#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "tendonforge/types.hpp"

namespace tendonforge {

// Indexed triangle soup in meters. No topology guarantees beyond valid
// indices; slicing and nearest-vertex queries tolerate open or messy meshes.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::string name;
};

// Throws InputError unless: at least one face, all indices in range,
// all coordinates finite.
void validate_mesh(const TriMesh& mesh);

// Wavefront OBJ, v/f records only. Polygon faces are fan-triangulated;
// negative indices resolve against the vertices read so far.
TriMesh load_obj(const std::filesystem::path& path);

// Binary STL (little-endian). Duplicate corner vertices are welded by exact
// coordinate match to recover an indexed mesh.
TriMesh load_stl(const std::filesystem::path& path);

// Dispatch by extension (.obj / .stl, case-insensitive).
TriMesh load_mesh(const std::filesystem::path& path);

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

// Dominant direction of the vertex cloud: unit eigenvector of the vertex
// covariance with the largest eigenvalue. Sign is canonicalized so the
// component with the largest magnitude is positive.
Vec3 principal_axis(const TriMesh& mesh);

}  // namespace tendonforge
