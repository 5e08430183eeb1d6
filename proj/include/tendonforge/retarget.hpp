#pragma once

#include <map>
#include <string>
#include <vector>

#include "tendonforge/limb.hpp"
#include "tendonforge/types.hpp"

namespace tendonforge {

// A marker trajectory in capture space. Frames map marker names to 3D
// positions; a name absent from a frame is a dropped marker for that frame.
struct MocapClip {
  double fps = 60.0;
  std::vector<std::map<std::string, Vec3>> frames;

  int n_frames() const { return static_cast<int>(frames.size()); }
};

void validate(const MocapClip& clip);

struct IkOptions {
  double damping = 0.05;
  int max_iterations = 100;
  double tol_error = 1e-6;  // stop when the stacked error norm drops below (m)
  double tol_step = 1e-9;   // stop when the joint update norm drops below (rad)
};

struct IkResult {
  Eigen::VectorXd q;
  double error_norm = 0.0;
  int iterations = 0;
};

// Damped-least-squares IK: Dq = J^T (J J^T + lambda^2 I)^-1 e, clamped to the
// joint limits after every update. Targets are 3D; the planar model's markers
// sit at z = 0, so any z offset in a target shows up in the residual but
// cannot move the joints.
IkResult ik_solve(const LimbModel& model, const std::vector<int>& marker_ids,
                  const std::vector<Vec3>& targets, const Eigen::VectorXd& q_init,
                  const IkOptions& options = {});
IkResult ik_solve(const LimbModel& model,
                  const std::map<std::string, Vec3>& targets,
                  const Eigen::VectorXd& q_init, const IkOptions& options = {});

// Uniform scale of the clip relative to the model: positions are centered
// per frame about their centroid, then the forward fit (model onto clip) and
// the inverted reverse fit are combined as a geometric mean. The result is
// the factor by which the capture is larger than the model. forward_only
// returns just the forward least-squares fit.
double fit_scale(const LimbModel& model, const std::vector<Eigen::VectorXd>& poses,
                 const MocapClip& clip, bool forward_only = false);

struct RetargetOptions {
  double tolerance = 1e-6;  // stop when the scale stops moving
  int max_outer = 20;
  IkOptions ik;
  // Chained warm starts (frame f from frame f-1) unless parallel, which
  // warm-starts every frame from the previous outer pass and solves frames
  // concurrently.
  bool parallel = false;
  int threads = 1;
  bool forward_scale = false;
};

struct OuterRecord {
  int iteration = 0;
  double scale = 1.0;
  double total_residual = 0.0;  // sum of squared capture-space errors (m^2)
  bool accepted = false;
};

struct RetargetResult {
  std::vector<Eigen::VectorXd> poses;  // per-frame joint angles
  double scale = 1.0;
  std::vector<double> residuals;     // per-frame RMS marker error, model space (m)
  std::vector<double> root_offsets;  // per-frame vertical root shift (m)
  int outer_iterations = 0;
  std::vector<OuterRecord> log;
};

// Alternates per-frame IK against the scaled capture with a closed-form scale
// refit until the scale settles. An outer update that increases the total
// capture-space residual is rejected and ends the loop. Ground clearance is
// applied to the final poses.
RetargetResult retarget(const LimbModel& model, const MocapClip& clip,
                        const RetargetOptions& options = {});

// Fills root_offsets so that shifting each frame's root vertically by its
// offset puts every marker at height >= 0.
void ground_clearance(RetargetResult& result, const LimbModel& model);

MocapClip read_clip_csv(const std::string& path, double fps = 60.0);
void write_clip_csv(const std::string& path, const MocapClip& clip);
MocapClip read_clip_json(const std::string& path);
void write_clip_json(const std::string& path, const MocapClip& clip);
// Dispatches on the file extension (.csv or .json).
MocapClip load_clip(const std::string& path);

void write_result_csv(const std::string& path, const RetargetResult& result);
void write_result_metadata(const std::string& path, const RetargetResult& result);

}  // namespace tendonforge
