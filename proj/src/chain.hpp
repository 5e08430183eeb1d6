#pragma once

#include <algorithm>

#include "tendonforge/limb.hpp"

// Shared planar-chain kinematics used by the dynamics and derivative
// translation units. Everything here assumes q has model.n_links() entries.

namespace tendonforge::detail {

struct Chain {
  int n = 0;
  std::vector<double> theta;  // absolute link angles, size n
  std::vector<Vec2> joints;   // J_0..J_n, size n+1
};

inline Chain make_chain(const LimbModel& model, const Eigen::VectorXd& q) {
  Chain c;
  c.n = model.n_links();
  c.theta.resize(c.n);
  c.joints.resize(c.n + 1);
  c.joints[0] = Vec2::Zero();
  double angle = model.base_angle;
  for (int i = 0; i < c.n; ++i) {
    angle += q[i];
    c.theta[i] = angle;
    Vec2 dir(std::cos(angle), std::sin(angle));
    c.joints[i + 1] = c.joints[i] + model.links[i].length * dir;
  }
  return c;
}

// World position of a local (along, perpendicular) offset on `link`;
// link = -1 places the offset directly in the world frame.
inline Vec2 chain_point(const Chain& c, int link, const Vec2& offset) {
  if (link < 0) return offset;
  double ct = std::cos(c.theta[link]), st = std::sin(c.theta[link]);
  return c.joints[link] +
         Vec2(ct * offset.x() - st * offset.y(), st * offset.x() + ct * offset.y());
}

// d p / d q_j for a point p riding on `link`.
inline Vec2 dpoint(const Chain& c, const Vec2& p, int link, int j) {
  if (j > link) return Vec2::Zero();
  return rot90(p - c.joints[j]);
}

// d^2 p / d q_j d q_k for a point p riding on `link`.
inline Vec2 d2point(const Chain& c, const Vec2& p, int link, int j, int k) {
  int m = std::max(j, k);
  if (m > link) return Vec2::Zero();
  return -(p - c.joints[m]);
}

// d J_m / d q_l (joint positions move only with strictly earlier joints).
inline Vec2 djoint(const Chain& c, int m, int l) {
  if (l >= m) return Vec2::Zero();
  return rot90(c.joints[m] - c.joints[l]);
}

inline Vec2 com_position(const LimbModel& model, const Chain& c, int link) {
  return chain_point(c, link, Vec2(model.links[link].com, 0.0));
}

// 2 x n Jacobian of a point riding on `link`.
inline Eigen::MatrixXd point_jacobian(const Chain& c, const Vec2& p, int link) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, c.n);
  for (int j = 0; j <= link; ++j) J.col(j) = dpoint(c, p, link, j);
  return J;
}

std::vector<Vec2> muscle_points(const Chain& c, const LimbMuscle& muscle);

// Path length, its gradient, and (when H is non-null) its Hessian in q.
void muscle_path_geometry(const Chain& c, const LimbMuscle& muscle,
                          double& length, Eigen::VectorXd& dL,
                          Eigen::MatrixXd* H);

// Joint-limit torque and its (diagonal) derivative d tau / d q.
double limit_torque(const LimbModel& model, int joint, double q);
double limit_torque_dq(const LimbModel& model, int joint, double q);

}  // namespace tendonforge::detail
