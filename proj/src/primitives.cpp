#include "tendonforge/primitives.hpp"

#include <cmath>

namespace tendonforge {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TriMesh make_box(const Vec3& lo, const Vec3& hi, const std::string& name) {
  TriMesh m;
  m.name = name;
  m.vertices = {
      {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()},
      {hi.x(), hi.y(), lo.z()}, {lo.x(), hi.y(), lo.z()},
      {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
      {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()},
  };
  m.faces = {
      {0, 3, 2}, {0, 2, 1},  // -z
      {4, 5, 6}, {4, 6, 7},  // +z
      {0, 1, 5}, {0, 5, 4},  // -y
      {2, 3, 7}, {2, 7, 6},  // +y
      {0, 4, 7}, {0, 7, 3},  // -x
      {1, 2, 6}, {1, 6, 5},  // +x
  };
  return m;
}

TriMesh make_cylinder(double radius, double length, int segments,
                      const std::string& name) {
  TriMesh m;
  m.name = name;
  const int s = segments;
  // Ring 0 at x=0 occupies [0, s), ring 1 at x=length occupies [s, 2s).
  for (int ring = 0; ring < 2; ++ring) {
    double x = ring == 0 ? 0.0 : length;
    for (int j = 0; j < s; ++j) {
      double phi = 2.0 * kPi * j / s;
      m.vertices.emplace_back(x, radius * std::cos(phi), radius * std::sin(phi));
    }
  }
  int c0 = 2 * s, c1 = 2 * s + 1;
  m.vertices.emplace_back(0.0, 0.0, 0.0);
  m.vertices.emplace_back(length, 0.0, 0.0);
  for (int j = 0; j < s; ++j) {
    int j1 = (j + 1) % s;
    m.faces.push_back({j, j1, s + j1});
    m.faces.push_back({j, s + j1, s + j});
    m.faces.push_back({c0, j1, j});
    m.faces.push_back({c1, s + j, s + j1});
  }
  return m;
}

TriMesh make_uv_sphere(double radius, int stacks, int segments,
                       const std::string& name) {
  TriMesh m;
  m.name = name;
  const int s = segments;
  int top = 0, bottom = 1;
  m.vertices.emplace_back(0.0, 0.0, radius);
  m.vertices.emplace_back(0.0, 0.0, -radius);
  auto ring_base = [&](int i) { return 2 + (i - 1) * s; };  // i in [1, stacks-1]
  for (int i = 1; i < stacks; ++i) {
    double phi = kPi * i / stacks;
    for (int j = 0; j < s; ++j) {
      double theta = 2.0 * kPi * j / s;
      m.vertices.emplace_back(radius * std::sin(phi) * std::cos(theta),
                              radius * std::sin(phi) * std::sin(theta),
                              radius * std::cos(phi));
    }
  }
  for (int j = 0; j < s; ++j) {
    int j1 = (j + 1) % s;
    m.faces.push_back({top, ring_base(1) + j, ring_base(1) + j1});
    m.faces.push_back({bottom, ring_base(stacks - 1) + j1, ring_base(stacks - 1) + j});
  }
  for (int i = 1; i < stacks - 1; ++i) {
    for (int j = 0; j < s; ++j) {
      int j1 = (j + 1) % s;
      int a = ring_base(i) + j, b = ring_base(i) + j1;
      int c = ring_base(i + 1) + j, d = ring_base(i + 1) + j1;
      m.faces.push_back({a, c, d});
      m.faces.push_back({a, d, b});
    }
  }
  return m;
}

TriMesh make_torus(double major, double minor, int segments_major,
                   int segments_minor, const std::string& name) {
  TriMesh m;
  m.name = name;
  const int nu = segments_major, nv = segments_minor;
  for (int i = 0; i < nu; ++i) {
    double u = 2.0 * kPi * i / nu;
    for (int k = 0; k < nv; ++k) {
      double v = 2.0 * kPi * k / nv;
      double w = major + minor * std::cos(v);
      m.vertices.emplace_back(w * std::cos(u), w * std::sin(u), minor * std::sin(v));
    }
  }
  auto at = [&](int i, int k) { return (i % nu) * nv + (k % nv); };
  for (int i = 0; i < nu; ++i) {
    for (int k = 0; k < nv; ++k) {
      int a = at(i, k), b = at(i + 1, k), c = at(i + 1, k + 1), d = at(i, k + 1);
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
    }
  }
  return m;
}

TriMesh translate_mesh(TriMesh mesh, const Vec3& offset) {
  for (auto& v : mesh.vertices) v += offset;
  return mesh;
}

}  // namespace tendonforge
