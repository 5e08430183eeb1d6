#include "tendonforge/demo.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "tendonforge/primitives.hpp"

namespace tendonforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

LimbMuscle make_muscle(const std::string& name, std::vector<PathPoint> path,
                       double f0, double scale) {
  LimbMuscle m;
  m.params.name = name;
  m.params.f0 = f0;
  // Slow-twitch deactivation; the wide tau_a/tau_d split keeps the two
  // activation models visibly distinct on the demo problem.
  m.params.tau_d = 0.15;
  m.params.tau_smooth = 0.01;
  m.scale = scale;
  m.path = std::move(path);
  return m;
}

}  // namespace

LimbModel demo_limb() {
  LimbModel model;
  model.name = "demo-leg";
  model.base_angle = -kPi / 2.0;  // hangs straight down at q = 0
  model.gravity = 9.81;
  model.damping = 0.1;
  model.limit_stiffness = 100.0;

  const double lengths[3] = {0.30, 0.28, 0.17};
  const double masses[3] = {3.0, 1.5, 0.4};
  const double inertias[3] = {0.0225, 0.0098, 0.001};
  for (int i = 0; i < 3; ++i) {
    LinkParams link;
    link.length = lengths[i];
    link.mass = masses[i];
    link.inertia = inertias[i];
    link.com = lengths[i] / 2.0;
    link.lower = -2.5;
    link.upper = 2.5;
    model.links.push_back(link);
  }

  model.muscles.push_back(make_muscle(
      "hip_flexor", {{-1, {0.05, 0.03}}, {0, {0.12, 0.03}}}, 0.0, 100.0));
  model.muscles.push_back(make_muscle(
      "hip_extensor", {{-1, {-0.05, 0.03}}, {0, {0.12, -0.03}}}, 0.0, 40.0));
  model.muscles.push_back(
      make_muscle("vasti", {{0, {0.22, 0.035}}, {1, {0.06, 0.03}}}, 120.0, 0.0));
  model.muscles.push_back(make_muscle(
      "hamstring", {{-1, {-0.06, 0.0}}, {1, {0.05, -0.03}}}, 250.0, 0.0));
  model.muscles.push_back(make_muscle(
      "gastrocnemius",
      {{0, {0.26, -0.03}}, {1, {0.26, -0.035}}, {2, {0.05, -0.025}}}, 0.0, 40.0));
  model.muscles.push_back(make_muscle(
      "tibialis", {{1, {0.22, 0.03}}, {2, {0.06, 0.025}}}, 0.0, 100.0));

  model.markers.push_back({0, {0.30, 0.0}, "knee"});
  model.markers.push_back({1, {0.28, 0.0}, "ankle"});
  model.markers.push_back({2, {0.17, 0.0}, "toe"});
  model.markers.push_back({0, {0.15, 0.03}, "thigh"});

  model.rest_pose = Eigen::VectorXd::Zero(3);
  finalize_model(model);
  return model;
}

std::vector<Eigen::VectorXd> demo_excitations(const LimbModel& model,
                                              int horizon, double dt) {
  const int m = model.n_muscles();
  // Staggered burst drive: each muscle fires in sharp pulses with quiet
  // gaps, so tracking the result exercises fast activation shedding, not
  // just sustained holds.
  std::vector<Eigen::VectorXd> out(horizon, Eigen::VectorXd::Zero(m));
  for (int k = 0; k < horizon; ++k) {
    double t = k * dt;
    for (int j = 0; j < m; ++j) {
      double freq = 2.2 + 0.5 * j;  // Hz, staggered per muscle
      double phase = 0.9 * j;
      double s = std::sin(2.0 * kPi * freq * t + phase);
      double burst = s > 0.0 ? s * s * s : 0.0;
      out[k][j] = 0.04 + 0.55 * burst;
    }
  }
  return out;
}

MarkerReference demo_reference(const LimbModel& model, int horizon, double dt,
                               ActivationMode mode) {
  return rollout_reference(model, rest_state(model),
                           demo_excitations(model, horizon, dt), dt, mode);
}

TrackingProblem demo_problem(int horizon, double dt, ActivationMode mode) {
  TrackingProblem p;
  p.model = demo_limb();
  p.horizon = horizon;
  p.dt = dt;
  p.mode = mode;
  // The reference is always rolled out with the smoothed activation model so
  // both modes chase the same motion.
  p.reference = demo_reference(p.model, horizon, dt, ActivationMode::smoothed);
  return p;
}

MocapClip demo_clip(const LimbModel& model, int frames, double fps, double scale,
                    std::vector<Eigen::VectorXd>* true_poses) {
  const int n = model.n_links();
  const double amp[3] = {0.5, 0.4, 0.3};
  const double freq[3] = {0.8, 1.1, 1.4};  // Hz
  const double phase[3] = {0.0, 0.7, 1.4};

  MocapClip clip;
  clip.fps = fps;
  if (true_poses) true_poses->clear();
  for (int f = 0; f < frames; ++f) {
    double t = f / fps;
    Eigen::VectorXd q = model.rest_pose;
    for (int i = 0; i < n && i < 3; ++i)
      q[i] += amp[i] * std::sin(2.0 * kPi * freq[i] * t + phase[i]);
    if (true_poses) true_poses->push_back(q);

    LimbState s = rest_state(model);
    s.q = q;
    std::vector<Vec2> pos = marker_positions(model, s);
    std::map<std::string, Vec3> frame;
    for (int i = 0; i < model.n_markers(); ++i)
      frame[model.markers[i].name] =
          scale * Vec3(pos[i].x(), pos[i].y(), 0.0);
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

TriMesh demo_muscle_mesh() {
  TriMesh mesh = make_cylinder(0.02, 0.3, 32, "demo_muscle");
  return mesh;
}

std::vector<TriMesh> demo_bone_meshes() {
  TriMesh femur =
      make_box({0.0, -0.06, -0.02}, {0.148, -0.02, 0.02}, "femur");
  TriMesh tibia =
      make_box({0.152, -0.06, -0.02}, {0.30, -0.02, 0.02}, "tibia");
  return {femur, tibia};
}

DemoFixtures write_demo_fixtures(const std::string& dir, int horizon, double dt,
                                 int frames) {
  std::filesystem::create_directories(dir);
  std::filesystem::path base(dir);
  DemoFixtures out;

  LimbModel model = demo_limb();
  out.model = (base / "model.json").string();
  save_model(model, out.model);

  MarkerReference ref = demo_reference(model, horizon, dt);
  out.reference = (base / "reference.csv").string();
  write_reference(out.reference, model, ref, dt);

  out.problem = (base / "problem.json").string();
  nlohmann::ordered_json jp;
  jp["model_path"] = "model.json";
  jp["reference_path"] = "reference.csv";
  jp["horizon"] = horizon;
  jp["dt"] = dt;
  jp["mode"] = "smoothed";
  std::ofstream pf(out.problem);
  if (!pf) throw InputError("cannot write problem file: " + out.problem);
  pf << jp.dump(2) << "\n";

  MocapClip clip = demo_clip(model, frames);
  out.clip_csv = (base / "clip.csv").string();
  out.clip_json = (base / "clip.json").string();
  write_clip_csv(out.clip_csv, clip);
  write_clip_json(out.clip_json, clip);

  out.muscle_mesh = (base / "demo_muscle.obj").string();
  save_obj(demo_muscle_mesh(), out.muscle_mesh);
  for (const TriMesh& bone : demo_bone_meshes()) {
    std::string path = (base / (bone.name + ".obj")).string();
    save_obj(bone, path);
    out.bone_meshes.push_back(path);
  }
  return out;
}

}  // namespace tendonforge
