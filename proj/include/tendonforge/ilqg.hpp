#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tendonforge/types.hpp"

namespace tendonforge {

// Quadratic model of one stage cost around a trajectory point. Terminal
// expansions leave the control blocks empty.
struct CostExpansion {
  double l = 0.0;
  Eigen::VectorXd lx, lu;
  Eigen::MatrixXd lxx, luu, lux;
};

struct DynamicsJacobians {
  Eigen::MatrixXd A;  // d f / d x
  Eigen::MatrixXd B;  // d f / d u
};

// Discrete-time optimal control problem over a fixed horizon. Implementors
// must be deterministic: dynamics() is re-invoked to verify trajectories.
class OcpProblem {
 public:
  virtual ~OcpProblem() = default;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual int horizon() const = 0;
  virtual Eigen::VectorXd initial_state() const = 0;
  virtual Eigen::VectorXd dynamics(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, int k) const = 0;
  // Default: central finite differences of dynamics() with step 1e-6.
  virtual DynamicsJacobians dynamics_jacobians(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& u,
                                               int k) const;
  virtual double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                            int k) const = 0;
  virtual double terminal_cost(const Eigen::VectorXd& x) const = 0;
  virtual CostExpansion cost_expansion(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& u, int k) const = 0;
  virtual CostExpansion terminal_expansion(const Eigen::VectorXd& x) const = 0;
};

struct IlqgOptions {
  int max_iterations = 200;
  double tol_rel_improve = 1e-7;  // accepted-improvement stopping threshold
  double tol_expected = 1e-12;    // expected-improvement stopping threshold
  double mu_init = 1e-6;
  double mu_factor = 10.0;
  double mu_cap = 1e10;
  double mu_min = 1e-12;
  int line_search_steps = 11;  // alpha = 1, 1/2, ..., 2^-10
  int threads = 1;             // parallelism for per-step derivative evaluation
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;      // trajectory cost after this iteration
  double mu = 0.0;        // regularization used by the backward pass
  double alpha = 0.0;     // accepted line-search step, 0 if rejected
  double expected = 0.0;  // predicted cost reduction at alpha = 1
  bool accepted = false;
};

struct IlqgResult {
  std::vector<Eigen::VectorXd> states;    // horizon + 1
  std::vector<Eigen::VectorXd> controls;  // horizon
  double cost = 0.0;
  int iterations = 0;
  std::string status;  // converged | max-iterations | converged-by-regularization-cap
  std::vector<IterationRecord> log;
};

// Iterative LQG with control-space Levenberg regularization and a backtracking
// line search on the feedforward term. Accepts only strict cost decreases, so
// the accepted entries of the log are strictly decreasing in cost. Throws
// SolverError("bad initialization") when the initial rollout is non-finite.
IlqgResult ilqg_solve(const OcpProblem& problem,
                      const std::vector<Eigen::VectorXd>& u_init,
                      const IlqgOptions& options = {});

}  // namespace tendonforge
