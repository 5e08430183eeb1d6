#pragma once

#include <string>
#include <vector>

#include "tendonforge/limb.hpp"
#include "tendonforge/mesh.hpp"
#include "tendonforge/retarget.hpp"
#include "tendonforge/tracking.hpp"

namespace tendonforge {

// Bundled 3-link, 6-muscle planar leg (thigh, shank, foot hanging from the
// origin) used by the examples and tests.
LimbModel demo_limb();

// Deterministic excitation schedule: per-muscle offset sinusoids at
// staggered frequencies and phases.
std::vector<Eigen::VectorXd> demo_excitations(const LimbModel& model,
                                              int horizon, double dt);

// Tracking reference produced by rolling out demo_excitations from rest.
MarkerReference demo_reference(const LimbModel& model, int horizon, double dt,
                               ActivationMode mode = ActivationMode::smoothed);

TrackingProblem demo_problem(int horizon = 300, double dt = 1e-3,
                             ActivationMode mode = ActivationMode::smoothed);

// Synthetic capture: smooth joint sinusoids with markers scaled by `scale`.
// true_poses receives the generating joint angles when non-null.
MocapClip demo_clip(const LimbModel& model, int frames = 60, double fps = 60.0,
                    double scale = 1.25,
                    std::vector<Eigen::VectorXd>* true_poses = nullptr);

// Fixture meshes for line-of-action extraction: a straight muscle cylinder
// over two bone boxes whose nearest-vertex regions meet at x = 0.15.
TriMesh demo_muscle_mesh();
std::vector<TriMesh> demo_bone_meshes();

struct DemoFixtures {
  std::string model, reference, problem, clip_csv, clip_json;
  std::string muscle_mesh;
  std::vector<std::string> bone_meshes;
};

// Writes every bundled fixture into `dir` (created if missing).
DemoFixtures write_demo_fixtures(const std::string& dir, int horizon = 300,
                                 double dt = 1e-3, int frames = 60);

}  // namespace tendonforge
