#include "tendonforge/ilqg.hpp"

#include <cmath>

#include "tendonforge/threading.hpp"

namespace tendonforge {

DynamicsJacobians OcpProblem::dynamics_jacobians(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& u,
                                                 int k) const {
  constexpr double h = 1e-6;
  const int nx = state_dim(), nu = control_dim();
  DynamicsJacobians J;
  J.A.resize(nx, nx);
  J.B.resize(nx, nu);
  Eigen::VectorXd xp = x, xm = x;
  for (int i = 0; i < nx; ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    J.A.col(i) = (dynamics(xp, u, k) - dynamics(xm, u, k)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  Eigen::VectorXd up = u, um = u;
  for (int i = 0; i < nu; ++i) {
    up[i] = u[i] + h;
    um[i] = u[i] - h;
    J.B.col(i) = (dynamics(x, up, k) - dynamics(x, um, k)) / (2.0 * h);
    up[i] = u[i];
    um[i] = u[i];
  }
  return J;
}

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Rollout from the problem's initial state; returns false on non-finite
// states or cost. states gets horizon+1 entries.
bool rollout(const OcpProblem& p, const std::vector<Eigen::VectorXd>& controls,
             std::vector<Eigen::VectorXd>& states, double& cost) {
  const int N = p.horizon();
  states.assign(N + 1, Eigen::VectorXd());
  states[0] = p.initial_state();
  cost = 0.0;
  for (int k = 0; k < N; ++k) {
    if (!finite(states[k])) return false;
    cost += p.stage_cost(states[k], controls[k], k);
    states[k + 1] = p.dynamics(states[k], controls[k], k);
  }
  if (!finite(states[N])) return false;
  cost += p.terminal_cost(states[N]);
  return std::isfinite(cost);
}

// Closed-loop rollout around a reference trajectory.
bool forward_pass(const OcpProblem& p, const std::vector<Eigen::VectorXd>& states,
                  const std::vector<Eigen::VectorXd>& controls,
                  const std::vector<Eigen::VectorXd>& k_ff,
                  const std::vector<Eigen::MatrixXd>& K, double alpha,
                  std::vector<Eigen::VectorXd>& new_states,
                  std::vector<Eigen::VectorXd>& new_controls, double& new_cost) {
  const int N = p.horizon();
  new_states.assign(N + 1, Eigen::VectorXd());
  new_controls.assign(N, Eigen::VectorXd());
  new_states[0] = p.initial_state();
  new_cost = 0.0;
  for (int k = 0; k < N; ++k) {
    new_controls[k] =
        controls[k] + alpha * k_ff[k] + K[k] * (new_states[k] - states[k]);
    if (!finite(new_controls[k])) return false;
    new_cost += p.stage_cost(new_states[k], new_controls[k], k);
    new_states[k + 1] = p.dynamics(new_states[k], new_controls[k], k);
    if (!finite(new_states[k + 1])) return false;
  }
  new_cost += p.terminal_cost(new_states[N]);
  return std::isfinite(new_cost);
}

struct TrajectoryDerivs {
  std::vector<DynamicsJacobians> dyn;
  std::vector<CostExpansion> stage;
  CostExpansion terminal;
};

void compute_derivs(const OcpProblem& p, const std::vector<Eigen::VectorXd>& states,
                    const std::vector<Eigen::VectorXd>& controls, int threads,
                    TrajectoryDerivs& d) {
  const int N = p.horizon();
  d.dyn.resize(N);
  d.stage.resize(N);
  parallel_for(N, threads, [&](int k) {
    d.dyn[k] = p.dynamics_jacobians(states[k], controls[k], k);
    d.stage[k] = p.cost_expansion(states[k], controls[k], k);
  });
  d.terminal = p.terminal_expansion(states[N]);
}

bool backward_pass(const TrajectoryDerivs& d, double mu,
                   std::vector<Eigen::VectorXd>& k_ff,
                   std::vector<Eigen::MatrixXd>& K, double& dV1, double& dV2) {
  const int N = static_cast<int>(d.dyn.size());
  k_ff.assign(N, Eigen::VectorXd());
  K.assign(N, Eigen::MatrixXd());
  Eigen::VectorXd Vx = d.terminal.lx;
  Eigen::MatrixXd Vxx = d.terminal.lxx;
  dV1 = dV2 = 0.0;
  for (int k = N - 1; k >= 0; --k) {
    const auto& dyn = d.dyn[k];
    const auto& c = d.stage[k];
    Eigen::VectorXd Qx = c.lx + dyn.A.transpose() * Vx;
    Eigen::VectorXd Qu = c.lu + dyn.B.transpose() * Vx;
    Eigen::MatrixXd Qxx = c.lxx + dyn.A.transpose() * Vxx * dyn.A;
    Eigen::MatrixXd Quu = c.luu + dyn.B.transpose() * Vxx * dyn.B;
    Eigen::MatrixXd Qux = c.lux + dyn.B.transpose() * Vxx * dyn.A;

    Eigen::MatrixXd Quu_reg = Quu;
    Quu_reg.diagonal().array() += mu;
    Eigen::LLT<Eigen::MatrixXd> llt(Quu_reg);
    if (llt.info() != Eigen::Success) return false;

    k_ff[k] = -llt.solve(Qu);
    K[k] = -llt.solve(Qux);
    dV1 += k_ff[k].dot(Qu);
    dV2 += 0.5 * k_ff[k].dot(Quu * k_ff[k]);

    Vx = Qx + K[k].transpose() * Quu * k_ff[k] + K[k].transpose() * Qu +
         Qux.transpose() * k_ff[k];
    Vxx = Qxx + K[k].transpose() * Quu * K[k] + K[k].transpose() * Qux +
          Qux.transpose() * K[k];
    Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
  }
  return true;
}

}  // namespace

IlqgResult ilqg_solve(const OcpProblem& problem,
                      const std::vector<Eigen::VectorXd>& u_init,
                      const IlqgOptions& options) {
  const int N = problem.horizon();
  const int nu = problem.control_dim();
  if (static_cast<int>(u_init.size()) != N)
    throw InputError("initial controls must match the horizon");
  for (const auto& u : u_init)
    if (u.size() != nu || !u.allFinite())
      throw InputError("initial controls must be finite with matching dimension");

  IlqgResult res;
  res.controls = u_init;
  if (!rollout(problem, res.controls, res.states, res.cost))
    throw SolverError("bad initialization");

  double mu = options.mu_init;
  std::vector<Eigen::VectorXd> k_ff;
  std::vector<Eigen::MatrixXd> K;
  std::vector<Eigen::VectorXd> cand_states, cand_controls;
  TrajectoryDerivs derivs;
  bool derivs_valid = false;

  for (int it = 1; it <= options.max_iterations; ++it) {
    if (!derivs_valid) {
      compute_derivs(problem, res.states, res.controls, options.threads, derivs);
      derivs_valid = true;
    }

    double dV1, dV2;
    while (!backward_pass(derivs, mu, k_ff, K, dV1, dV2)) {
      mu *= options.mu_factor;
      if (mu > options.mu_cap) {
        res.status = "converged-by-regularization-cap";
        return res;
      }
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.mu = mu;
    rec.expected = -(dV1 + dV2);
    res.iterations = it;

    // Vanishing predicted improvement: the current trajectory is stationary
    // to numerical precision (also catches identically-zero costs).
    if (rec.expected < options.tol_expected * (1.0 + std::abs(res.cost))) {
      rec.cost = res.cost;
      res.log.push_back(rec);
      res.status = "converged";
      return res;
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < options.line_search_steps; ++ls, alpha *= 0.5) {
      double cand_cost;
      if (!forward_pass(problem, res.states, res.controls, k_ff, K, alpha,
                        cand_states, cand_controls, cand_cost))
        continue;
      if (cand_cost < res.cost) {
        double improvement = res.cost - cand_cost;
        res.states = std::move(cand_states);
        res.controls = std::move(cand_controls);
        res.cost = cand_cost;
        derivs_valid = false;
        rec.alpha = alpha;
        rec.accepted = true;
        rec.cost = res.cost;
        res.log.push_back(rec);
        mu = std::max(options.mu_min, mu / options.mu_factor);
        accepted = true;
        if (improvement < options.tol_rel_improve * std::max(1.0, std::abs(res.cost))) {
          res.status = "converged";
          return res;
        }
        break;
      }
    }

    if (!accepted) {
      rec.cost = res.cost;
      res.log.push_back(rec);
      mu *= options.mu_factor;
      if (mu > options.mu_cap) {
        res.status = "converged-by-regularization-cap";
        return res;
      }
    }
  }
  res.status = "max-iterations";
  return res;
}

}  // namespace tendonforge
