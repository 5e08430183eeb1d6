#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "tendonforge/muscle.hpp"
#include "tendonforge/types.hpp"

namespace tendonforge {

// Planar muscle-actuated chain. The base joint sits at the world origin;
// link i extends along its local +x axis, rotated by
// base_angle + q_0 + ... + q_i from the world x axis. Local offsets are
// (along-link, perpendicular) in meters.

struct LinkParams {
  double length = 0.0;   // m
  double mass = 0.0;     // kg
  double inertia = 0.0;  // kg*m^2 about the center of mass
  double com = 0.0;      // center-of-mass distance from the proximal joint (m)
  double lower = -1e9, upper = 1e9;  // joint limits (rad)
};

struct PathPoint {
  int link = -1;  // -1 anchors to the world (base) frame
  Vec2 offset = Vec2::Zero();
};

struct LimbMuscle {
  MuscleParams params;  // params.name is the muscle name
  double scale = 0.0;   // > 0: f0 is calibrated to scale / acc0 at finalize
  std::vector<PathPoint> path;  // >= 2 sites spanning >= 1 joint

  // Set by finalize_model:
  double rest_length = 0.0;  // path length at the rest pose (m)
  double acc0 = 0.0;         // |M^-1 dL/dq| at the rest pose (unit tension)
};

struct LimbMarker {
  int link = 0;
  Vec2 offset = Vec2::Zero();
  std::string name;
};

struct LimbModel {
  std::string name = "limb";
  double base_angle = 0.0;        // world angle of link 0 at q = 0 (rad)
  double gravity = 9.81;          // m/s^2, pulls along -y
  double damping = 0.1;           // N*m*s/rad per joint
  double limit_stiffness = 100.0; // cubic penalty gain beyond joint limits
  std::vector<LinkParams> links;
  std::vector<LimbMuscle> muscles;
  std::vector<LimbMarker> markers;
  Eigen::VectorXd rest_pose;      // reference q for length normalization

  int n_links() const { return static_cast<int>(links.size()); }
  int n_muscles() const { return static_cast<int>(muscles.size()); }
  int n_markers() const { return static_cast<int>(markers.size()); }
};

// Validates the model and computes derived quantities: per-muscle rest
// lengths, unit-tension acceleration norms, and f0 for muscles declared via
// `scale`. Must run before any dynamics call; idempotent.
void finalize_model(LimbModel& model);

nlohmann::ordered_json model_to_json(const LimbModel& model);
LimbModel model_from_json(const nlohmann::json& j);  // finalizes
LimbModel load_model(const std::string& path);
void save_model(const LimbModel& model, const std::string& path);

int marker_index(const LimbModel& model, const std::string& name);

struct LimbState {
  Eigen::VectorXd q;     // n_links
  Eigen::VectorXd qdot;  // n_links
  Eigen::VectorXd a;     // n_muscles, in [0,1]
};

LimbState rest_state(const LimbModel& model);

// State vector layout [q; qdot; a] used by the planner.
Eigen::VectorXd pack_state(const LimbState& state);
LimbState unpack_state(const LimbModel& model, const Eigen::VectorXd& x);

// Forward kinematics: joint positions J_0..J_n (J_n is the chain tip).
std::vector<Vec2> joint_positions(const LimbModel& model, const Eigen::VectorXd& q);
// World position of a local offset on a link (-1 = world frame).
Vec2 site_position(const LimbModel& model, const Eigen::VectorXd& q, int link,
                   const Vec2& offset);

struct MuscleGeometry {
  double length = 0.0;       // m
  double norm_length = 0.0;  // length / rest_length
  Eigen::VectorXd dLdq;      // m/rad
  double moment_arm(int joint) const { return -dLdq[joint]; }
};

std::vector<MuscleGeometry> muscle_geometry(const LimbModel& model,
                                            const Eigen::VectorXd& q);

std::vector<Vec2> marker_positions(const LimbModel& model, const LimbState& state);
std::vector<Vec2> marker_velocities(const LimbModel& model, const LimbState& state);
// Per-marker 2 x n position Jacobians at configuration q.
std::vector<Eigen::MatrixXd> marker_jacobians(const LimbModel& model,
                                              const Eigen::VectorXd& q);

Eigen::MatrixXd mass_matrix(const LimbModel& model, const Eigen::VectorXd& q);
// Velocity-product and gravity generalized forces; the equations of motion
// read M(q) qddot = applied_torques - bias_forces.
Eigen::VectorXd bias_forces(const LimbModel& model, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qdot);
// Muscle + damping + joint-limit torques at the given state.
Eigen::VectorXd applied_torques(const LimbModel& model, const LimbState& state);

struct ForwardDynamics {
  Eigen::VectorXd qddot;
  Eigen::VectorXd activation_rates;  // (u - a) / tau per muscle
};

ForwardDynamics forward_dynamics(const LimbModel& model, const LimbState& state,
                                 const Eigen::VectorXd& u, ActivationMode mode);

// Semi-implicit Euler: v' = v + dt*qddot, q' = q + dt*v', activations stepped
// and clamped per muscle. Throws SolverError("diverged") on non-finite output.
LimbState step(const LimbModel& model, const LimbState& state,
               const Eigen::VectorXd& u, double dt, ActivationMode mode);

// Kinetic + gravitational + joint-limit potential energy. Conserved by the
// passive undamped muscle-free chain.
double total_energy(const LimbModel& model, const LimbState& state);

}  // namespace tendonforge
