#pragma once

#include "tendonforge/mesh.hpp"

namespace tendonforge {

// Analytic test and demo shapes. All are watertight with outward-facing
// triangles, which the slicer's loop orientation relies on.

TriMesh make_box(const Vec3& lo, const Vec3& hi, const std::string& name = "box");

// Capped cylinder along +x from x=0 to x=length, centered on the x axis.
TriMesh make_cylinder(double radius, double length, int segments = 32,
                      const std::string& name = "cylinder");

// UV sphere centered at the origin. An odd stack count keeps vertex rings
// off the equator plane.
TriMesh make_uv_sphere(double radius, int stacks = 33, int segments = 64,
                       const std::string& name = "sphere");

// Torus around the z axis: tube radius `minor` swept at distance `major`.
TriMesh make_torus(double major, double minor, int segments_major = 64,
                   int segments_minor = 32, const std::string& name = "torus");

TriMesh translate_mesh(TriMesh mesh, const Vec3& offset);

}  // namespace tendonforge
