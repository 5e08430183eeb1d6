#pragma once

#include <string>
#include <vector>

#include "tendonforge/ilqg.hpp"
#include "tendonforge/limb.hpp"
#include "tendonforge/norms.hpp"

namespace tendonforge {

enum class ResidualKind { joint_velocity, control, marker_pos, marker_vel };

ResidualKind residual_from_name(const std::string& name);
const char* residual_name(ResidualKind kind);

struct CostTerm {
  ResidualKind residual = ResidualKind::marker_pos;
  NormKind norm = NormKind::smooth_abs;
  double p = 0.1;     // norm shape parameter, unused for quadratic
  double weight = 1.0;
};

// joint_velocity/quadratic w=0.01, control/cosh(0.3) w=0.1,
// marker_pos/smooth_abs(0.1) w=1.0, marker_vel/smooth_abs(0.3) w=0.1.
std::vector<CostTerm> default_cost_terms();

// Target marker positions and velocities per step, model marker order,
// horizon+1 entries.
struct MarkerReference {
  std::vector<std::vector<Vec2>> positions;
  std::vector<std::vector<Vec2>> velocities;
};

struct TrackingProblem {
  LimbModel model;
  int horizon = 0;
  double dt = 1e-3;
  ActivationMode mode = ActivationMode::smoothed;
  std::vector<CostTerm> terms = default_cost_terms();
  MarkerReference reference;
  LimbState initial;  // empty vectors mean the model rest state
  int threads = 1;
};

// Throws InputError on dimension or parameter violations.
void validate(const TrackingProblem& problem);

// Weighted per-component norm cost at step k; k == horizon is the terminal
// step, which skips control terms. Returns the total and one entry per term.
struct StageCost {
  double total = 0.0;
  std::vector<double> per_term;
};
StageCost stage_cost(const TrackingProblem& problem, const LimbState& state,
                     const Eigen::VectorXd& u, int k);

struct Trajectory {
  std::vector<LimbState> states;          // horizon + 1
  std::vector<Eigen::VectorXd> controls;  // horizon
  double cost = 0.0;
  std::vector<double> term_costs;  // per cost term, summed over steps
  int iterations = 0;
  std::string status;
  std::vector<IterationRecord> log;
};

// Full-horizon trajectory optimization. Empty u_init means zeros. The
// options' thread count is overridden by the problem's.
Trajectory solve_tracking(const TrackingProblem& problem,
                          const std::vector<Eigen::VectorXd>& u_init = {},
                          const IlqgOptions& options = {});

// Receding-horizon variant: plan to the end of the reference, execute
// `execute_steps` controls, re-plan from the reached state (warm-started with
// the unexecuted tail). The assembled trajectory covers the full horizon.
// The options cap each re-plan, so a small max_iterations gives the usual
// fixed per-step planning budget.
Trajectory solve_receding(const TrackingProblem& problem, int execute_steps,
                          const IlqgOptions& options = {});

// Mean Euclidean marker error per step between two equally-shaped
// marker-position sequences.
std::vector<double> kinematic_error(const std::vector<std::vector<Vec2>>& sim,
                                    const std::vector<std::vector<Vec2>>& ref);

// Marker positions (and velocities) along a state sequence.
std::vector<std::vector<Vec2>> trajectory_markers(const LimbModel& model,
                                                  const std::vector<LimbState>& states);

// Simulates a control sequence and records the marker reference it traces.
MarkerReference rollout_reference(const LimbModel& model, const LimbState& initial,
                                  const std::vector<Eigen::VectorXd>& controls,
                                  double dt, ActivationMode mode);

// Reference CSV: header t,<name>.x,<name>.y,<name>.vx,<name>.vy per marker.
void write_reference(const std::string& path, const LimbModel& model,
                     const MarkerReference& reference, double dt);
MarkerReference read_reference(const std::string& path, const LimbModel& model);

// Trajectory CSV: t,q..,qd..,a..,u.. with a zero control row at the horizon.
void write_trajectory(const std::string& path, const LimbModel& model,
                      const Trajectory& trajectory, double dt);
// Marker CSV in reference format from a solved trajectory.
void write_trajectory_markers(const std::string& path, const LimbModel& model,
                              const Trajectory& trajectory, double dt);
// Per-iteration solver log CSV.
void write_cost_log(const std::string& path, const Trajectory& trajectory);
// Per-term cost breakdown CSV.
void write_term_costs(const std::string& path, const TrackingProblem& problem,
                      const Trajectory& trajectory);
// Per-step kinematic error CSV (t, error).
void write_error_csv(const std::string& path, const std::vector<double>& error,
                     double dt);

// Named marker positions loaded from a reference-format CSV (velocity columns
// optional): first the names, then per-step positions in name order.
struct MarkerSeries {
  std::vector<std::string> names;
  std::vector<std::vector<Vec2>> positions;
  std::vector<double> times;
};
MarkerSeries read_marker_series(const std::string& path);

// Problem JSON: {model_path, reference_path, horizon, dt, mode?, terms[]?,
// weights[]?, initial?}; relative paths resolve against the problem file.
TrackingProblem load_problem(const std::string& path);

}  // namespace tendonforge
