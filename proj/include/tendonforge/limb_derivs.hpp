#pragma once

#include "tendonforge/limb.hpp"

namespace tendonforge {

// Analytic partial derivatives of qddot from forward_dynamics with respect to
// q, qdot, and activations. Excitations do not enter qddot directly.
struct AccelDerivs {
  Eigen::VectorXd qddot;
  Eigen::MatrixXd dq;  // n x n
  Eigen::MatrixXd dv;  // n x n
  Eigen::MatrixXd da;  // n x m
};

AccelDerivs accel_derivs(const LimbModel& model, const LimbState& state);

// Jacobians of the one-step map x' = step(x, u) over x = [q; qdot; a].
// Exact for the smoothed activation mode; in switched mode the activation
// block uses the branchwise derivative, which jumps at u = a.
struct StepDerivs {
  Eigen::MatrixXd A;  // (2n+m) x (2n+m)
  Eigen::MatrixXd B;  // (2n+m) x m
};

StepDerivs step_derivs(const LimbModel& model, const LimbState& state,
                       const Eigen::VectorXd& u, double dt, ActivationMode mode);

// Marker positions, velocities, and the derivatives a Gauss-Newton tracking
// cost needs: J = d pos/d q (also d vel/d qdot) and dvel_dq = d vel/d q.
struct MarkerDerivs {
  std::vector<Vec2> pos;
  std::vector<Vec2> vel;
  std::vector<Eigen::MatrixXd> J;        // 2 x n each
  std::vector<Eigen::MatrixXd> dvel_dq;  // 2 x n each
};

MarkerDerivs marker_derivs(const LimbModel& model, const LimbState& state);

}  // namespace tendonforge
