#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace tendonforge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Unusable input: missing or malformed files, inconsistent sizes,
// parameters outside their documented range. CLI maps this to exit code 2.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an iterative solver (divergence, bad
// initialization). CLI maps this to exit code 3.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// 90-degree counter-clockwise rotation; the planar angular velocity operator.
inline Vec2 rot90(const Vec2& v) { return {-v.y(), v.x()}; }

}  // namespace tendonforge
