#include "tendonforge/limb_derivs.hpp"

#include "chain.hpp"

namespace tendonforge {

using detail::Chain;
using detail::chain_point;
using detail::com_position;
using detail::d2point;
using detail::djoint;
using detail::dpoint;
using detail::make_chain;
using detail::point_jacobian;

AccelDerivs accel_derivs(const LimbModel& model, const LimbState& state) {
  const int n = model.n_links();
  const int m = model.n_muscles();
  const Eigen::VectorXd& q = state.q;
  const Eigen::VectorXd& qd = state.qdot;
  Chain chain = make_chain(model, q);
  Vec2 g_vec(0.0, -model.gravity);

  // Inertia terms and their configuration derivatives.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::MatrixXd> dM(n, Eigen::MatrixXd::Zero(n, n));
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd dbias_dq = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dbias_dv = Eigen::MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i) {
    double mass = model.links[i].mass;
    Vec2 ci = com_position(model, chain, i);
    Eigen::MatrixXd Jc = point_jacobian(chain, ci, i);
    M += mass * Jc.transpose() * Jc;
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k <= i; ++k) M(j, k) += model.links[i].inertia;

    Vec2 conv = Vec2::Zero();
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k <= i; ++k)
        conv += qd[j] * qd[k] * d2point(chain, ci, i, j, k);
    bias += mass * (Jc.transpose() * (conv - g_vec));

    for (int l = 0; l <= i; ++l) {
      // dJc/dq_l: column j is the mixed second derivative of the COM point.
      Eigen::MatrixXd dJc = Eigen::MatrixXd::Zero(2, n);
      for (int j = 0; j <= i; ++j) dJc.col(j) = d2point(chain, ci, i, j, l);
      dM[l] += mass * (dJc.transpose() * Jc + Jc.transpose() * dJc);

      // conv depends on q through both the COM and the joint positions.
      Vec2 dci = dpoint(chain, ci, i, l);
      Vec2 dconv = Vec2::Zero();
      for (int j = 0; j <= i; ++j)
        for (int k = 0; k <= i; ++k)
          dconv += qd[j] * qd[k] * (-(dci - djoint(chain, std::max(j, k), l)));
      dbias_dq.col(l) +=
          mass * (dJc.transpose() * (conv - g_vec) + Jc.transpose() * dconv);

      Vec2 dconv_dv = Vec2::Zero();
      for (int k = 0; k <= i; ++k)
        dconv_dv += 2.0 * qd[k] * d2point(chain, ci, i, l, k);
      dbias_dv.col(l) += mass * (Jc.transpose() * dconv_dv);
    }
  }

  // Applied torques: damping, joint limits, muscles.
  Eigen::VectorXd tau = -model.damping * qd;
  Eigen::MatrixXd dtau_dq = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dtau_dv = -model.damping * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd dtau_da = Eigen::MatrixXd::Zero(n, m);
  for (int j = 0; j < n; ++j) {
    tau[j] += detail::limit_torque(model, j, q[j]);
    dtau_dq(j, j) += detail::limit_torque_dq(model, j, q[j]);
  }

  for (int mi = 0; mi < m; ++mi) {
    const LimbMuscle& muscle = model.muscles[mi];
    double L;
    Eigen::VectorXd dL;
    Eigen::MatrixXd H;
    detail::muscle_path_geometry(chain, muscle, L, dL, &H);
    double inv_rest = 1.0 / muscle.rest_length;
    double L_hat = L * inv_rest;
    double V_hat = dL.dot(qd) * inv_rest;
    FlvGrad f = flv_with_grad(muscle.params, L_hat, V_hat, state.a[mi]);
    double f0 = muscle.params.f0;
    double tension = f0 * f.value;
    tau -= tension * dL;

    Eigen::VectorXd Hqd = H * qd;
    // dT/dq_l = f0*(f_L*dL_l + f_V*(H qd)_l)/rest; dT/dv_l = f0*f_V*dL_l/rest.
    Eigen::VectorXd dT_dq = f0 * inv_rest * (f.dL * dL + f.dV * Hqd);
    Eigen::VectorXd dT_dv = f0 * inv_rest * f.dV * dL;
    dtau_dq -= dL * dT_dq.transpose() + tension * H;
    dtau_dv -= dL * dT_dv.transpose();
    dtau_da.col(mi) -= f0 * f.da * dL;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw SolverError("singular mass matrix");
  AccelDerivs out;
  out.qddot = llt.solve(tau - bias);
  Eigen::MatrixXd rhs_q(n, n);
  for (int l = 0; l < n; ++l)
    rhs_q.col(l) = dtau_dq.col(l) - dbias_dq.col(l) - dM[l] * out.qddot;
  out.dq = llt.solve(rhs_q);
  out.dv = llt.solve(dtau_dv - dbias_dv);
  out.da = llt.solve(dtau_da);
  return out;
}

StepDerivs step_derivs(const LimbModel& model, const LimbState& state,
                       const Eigen::VectorXd& u, double dt, ActivationMode mode) {
  const int n = model.n_links();
  const int m = model.n_muscles();
  const int dim = 2 * n + m;
  AccelDerivs acc = accel_derivs(model, state);

  StepDerivs out;
  out.A = Eigen::MatrixXd::Zero(dim, dim);
  out.B = Eigen::MatrixXd::Zero(dim, m);

  // v' = v + dt*qddot; q' = q + dt*v'.
  Eigen::MatrixXd dv_dq = dt * acc.dq;
  Eigen::MatrixXd dv_dv = Eigen::MatrixXd::Identity(n, n) + dt * acc.dv;
  Eigen::MatrixXd dv_da = dt * acc.da;
  out.A.block(n, 0, n, n) = dv_dq;
  out.A.block(n, n, n, n) = dv_dv;
  out.A.block(n, 2 * n, n, m) = dv_da;
  out.A.block(0, 0, n, n) = Eigen::MatrixXd::Identity(n, n) + dt * dv_dq;
  out.A.block(0, n, n, n) = dt * dv_dv;
  out.A.block(0, 2 * n, n, m) = dt * dv_da;

  for (int mi = 0; mi < m; ++mi) {
    ActivationStep astep = step_activation_with_grad(
        u[mi], state.a[mi], dt, model.muscles[mi].params, mode);
    out.A(2 * n + mi, 2 * n + mi) = astep.da_da;
    out.B(2 * n + mi, mi) = astep.da_du;
  }
  return out;
}

MarkerDerivs marker_derivs(const LimbModel& model, const LimbState& state) {
  const int n = model.n_links();
  Chain chain = make_chain(model, state.q);
  MarkerDerivs out;
  for (const auto& marker : model.markers) {
    Vec2 p = chain_point(chain, marker.link, marker.offset);
    Eigen::MatrixXd J = point_jacobian(chain, p, marker.link);
    out.pos.push_back(p);
    out.vel.push_back(J * state.qdot);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, n);
    for (int l = 0; l <= marker.link; ++l) {
      Vec2 col = Vec2::Zero();
      for (int j = 0; j <= marker.link; ++j)
        col += state.qdot[j] * d2point(chain, p, marker.link, j, l);
      W.col(l) = col;
    }
    out.J.push_back(std::move(J));
    out.dvel_dq.push_back(std::move(W));
  }
  return out;
}

}  // namespace tendonforge
