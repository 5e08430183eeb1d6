#include "tendonforge/tracking.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "tendonforge/csv.hpp"
#include "tendonforge/limb_derivs.hpp"
#include "tendonforge/threading.hpp"

namespace tendonforge {

ResidualKind residual_from_name(const std::string& name) {
  if (name == "joint_velocity") return ResidualKind::joint_velocity;
  if (name == "control") return ResidualKind::control;
  if (name == "marker_pos") return ResidualKind::marker_pos;
  if (name == "marker_vel") return ResidualKind::marker_vel;
  throw InputError("unknown residual: " + name);
}

const char* residual_name(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::joint_velocity: return "joint_velocity";
    case ResidualKind::control: return "control";
    case ResidualKind::marker_pos: return "marker_pos";
    default: return "marker_vel";
  }
}

std::vector<CostTerm> default_cost_terms() {
  return {
      {ResidualKind::joint_velocity, NormKind::quadratic, 0.0, 0.01},
      {ResidualKind::control, NormKind::cosh_norm, 0.3, 0.1},
      {ResidualKind::marker_pos, NormKind::smooth_abs, 0.1, 1.0},
      {ResidualKind::marker_vel, NormKind::smooth_abs, 0.3, 0.1},
  };
}

void validate(const TrackingProblem& p) {
  if (p.model.n_links() < 1) throw InputError("tracking needs a model");
  if (p.model.n_muscles() < 1) throw InputError("tracking needs muscles to actuate");
  if (p.model.n_markers() < 1) throw InputError("tracking needs markers");
  if (p.horizon < 1) throw InputError("horizon must be at least 1");
  if (!(p.dt > 0.0)) throw InputError("dt must be positive");
  if (p.terms.empty()) throw InputError("tracking needs at least one cost term");
  for (const auto& term : p.terms) {
    if (!(term.weight >= 0.0)) throw InputError("cost weights must be >= 0");
    if (term.norm != NormKind::quadratic && !(term.p > 0.0))
      throw InputError("cosh and smooth_abs norms require p > 0");
  }
  size_t want = static_cast<size_t>(p.horizon) + 1;
  if (p.reference.positions.size() != want || p.reference.velocities.size() != want)
    throw InputError("reference length must be horizon + 1");
  for (size_t k = 0; k < want; ++k)
    if (p.reference.positions[k].size() != static_cast<size_t>(p.model.n_markers()) ||
        p.reference.velocities[k].size() != static_cast<size_t>(p.model.n_markers()))
      throw InputError("reference marker count must match the model");
  if (p.initial.q.size() != 0 &&
      (p.initial.q.size() != p.model.n_links() ||
       p.initial.qdot.size() != p.model.n_links() ||
       p.initial.a.size() != p.model.n_muscles()))
    throw InputError("initial state dimensions must match the model");
}

namespace {

LimbState resolved_initial(const TrackingProblem& p) {
  return p.initial.q.size() == 0 ? rest_state(p.model) : p.initial;
}

}  // namespace

StageCost stage_cost(const TrackingProblem& p, const LimbState& state,
                     const Eigen::VectorXd& u, int k) {
  if (k < 0 || k > p.horizon) throw InputError("stage index out of range");
  const bool terminal = k == p.horizon;
  const int M = p.model.n_markers();

  bool needs_markers = false;
  for (const auto& term : p.terms)
    needs_markers |= term.residual == ResidualKind::marker_pos ||
                     term.residual == ResidualKind::marker_vel;
  std::vector<Vec2> pos, vel;
  if (needs_markers) {
    pos = marker_positions(p.model, state);
    vel = marker_velocities(p.model, state);
  }

  StageCost out;
  out.per_term.assign(p.terms.size(), 0.0);
  Eigen::VectorXd r;
  for (size_t ti = 0; ti < p.terms.size(); ++ti) {
    const CostTerm& term = p.terms[ti];
    double value = 0.0;
    switch (term.residual) {
      case ResidualKind::joint_velocity:
        value = norm_value(term.norm, state.qdot, term.p);
        break;
      case ResidualKind::control:
        if (!terminal) value = norm_value(term.norm, u, term.p);
        break;
      case ResidualKind::marker_pos:
        r.resize(2 * M);
        for (int m = 0; m < M; ++m)
          r.segment<2>(2 * m) = pos[m] - p.reference.positions[k][m];
        value = norm_value(term.norm, r, term.p);
        break;
      case ResidualKind::marker_vel:
        r.resize(2 * M);
        for (int m = 0; m < M; ++m)
          r.segment<2>(2 * m) = vel[m] - p.reference.velocities[k][m];
        value = norm_value(term.norm, r, term.p);
        break;
    }
    out.per_term[ti] = term.weight * value;
    out.total += term.weight * value;
  }
  return out;
}

namespace {

// Gauss-Newton quadratic model of the stage cost: residual curvature is
// dropped, norm curvature kept, so Hessians are positive semidefinite.
CostExpansion gn_expansion(const TrackingProblem& p, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, int k) {
  const LimbModel& model = p.model;
  const int n = model.n_links(), m = model.n_muscles(), nx = 2 * n + m;
  const bool terminal = k == p.horizon;
  LimbState s = unpack_state(model, x);

  CostExpansion e;
  e.lx = Eigen::VectorXd::Zero(nx);
  e.lxx = Eigen::MatrixXd::Zero(nx, nx);
  if (!terminal) {
    e.lu = Eigen::VectorXd::Zero(m);
    e.luu = Eigen::MatrixXd::Zero(m, m);
    e.lux = Eigen::MatrixXd::Zero(m, nx);
  }

  bool needs_markers = false;
  for (const auto& term : p.terms)
    needs_markers |= term.residual == ResidualKind::marker_pos ||
                     term.residual == ResidualKind::marker_vel;
  MarkerDerivs md;
  if (needs_markers) md = marker_derivs(model, s);

  Eigen::VectorXd h(2 * n);
  for (const auto& term : p.terms) {
    const double w = term.weight;
    switch (term.residual) {
      case ResidualKind::joint_velocity:
        for (int i = 0; i < n; ++i) {
          NormEval ne = norm_eval(term.norm, s.qdot[i], term.p);
          e.l += w * ne.value;
          e.lx[n + i] += w * ne.d1;
          e.lxx(n + i, n + i) += w * ne.d2;
        }
        break;
      case ResidualKind::control:
        if (terminal) break;
        for (int i = 0; i < m; ++i) {
          NormEval ne = norm_eval(term.norm, u[i], term.p);
          e.l += w * ne.value;
          e.lu[i] += w * ne.d1;
          e.luu(i, i) += w * ne.d2;
        }
        break;
      case ResidualKind::marker_pos:
        for (int mk = 0; mk < model.n_markers(); ++mk)
          for (int c = 0; c < 2; ++c) {
            double r = md.pos[mk][c] - p.reference.positions[k][mk][c];
            NormEval ne = norm_eval(term.norm, r, term.p);
            e.l += w * ne.value;
            Eigen::RowVectorXd row = md.J[mk].row(c);
            e.lx.head(n) += w * ne.d1 * row.transpose();
            e.lxx.topLeftCorner(n, n) += w * ne.d2 * row.transpose() * row;
          }
        break;
      case ResidualKind::marker_vel:
        for (int mk = 0; mk < model.n_markers(); ++mk)
          for (int c = 0; c < 2; ++c) {
            double r = md.vel[mk][c] - p.reference.velocities[k][mk][c];
            NormEval ne = norm_eval(term.norm, r, term.p);
            e.l += w * ne.value;
            h.head(n) = md.dvel_dq[mk].row(c).transpose();
            h.tail(n) = md.J[mk].row(c).transpose();
            e.lx.head(2 * n) += w * ne.d1 * h;
            e.lxx.topLeftCorner(2 * n, 2 * n) += w * ne.d2 * h * h.transpose();
          }
        break;
    }
  }
  return e;
}

class TrackingOcp : public OcpProblem {
 public:
  explicit TrackingOcp(const TrackingProblem& p)
      : p_(p), x0_(pack_state(resolved_initial(p))) {}

  int state_dim() const override {
    return 2 * p_.model.n_links() + p_.model.n_muscles();
  }
  int control_dim() const override { return p_.model.n_muscles(); }
  int horizon() const override { return p_.horizon; }
  Eigen::VectorXd initial_state() const override { return x0_; }

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           int) const override {
    return pack_state(step(p_.model, unpack_state(p_.model, x), u, p_.dt, p_.mode));
  }

  DynamicsJacobians dynamics_jacobians(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& u,
                                       int k) const override {
    if (p_.mode == ActivationMode::smoothed) {
      StepDerivs d =
          step_derivs(p_.model, unpack_state(p_.model, x), u, p_.dt, p_.mode);
      return {std::move(d.A), std::move(d.B)};
    }
    // The switched time constant is not differentiable; fall back to finite
    // differences so both modes run through the same solver.
    return OcpProblem::dynamics_jacobians(x, u, k);
  }

  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    int k) const override {
    return tendonforge::stage_cost(p_, unpack_state(p_.model, x), u, k).total;
  }
  double terminal_cost(const Eigen::VectorXd& x) const override {
    return tendonforge::stage_cost(p_, unpack_state(p_.model, x),
                                   Eigen::VectorXd::Zero(control_dim()), p_.horizon)
        .total;
  }
  CostExpansion cost_expansion(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               int k) const override {
    return gn_expansion(p_, x, u, k);
  }
  CostExpansion terminal_expansion(const Eigen::VectorXd& x) const override {
    return gn_expansion(p_, x, Eigen::VectorXd(), p_.horizon);
  }

 private:
  const TrackingProblem& p_;
  Eigen::VectorXd x0_;
};

}  // namespace

Trajectory solve_tracking(const TrackingProblem& p,
                          const std::vector<Eigen::VectorXd>& u_init,
                          const IlqgOptions& options) {
  validate(p);
  TrackingOcp ocp(p);
  std::vector<Eigen::VectorXd> u0 = u_init;
  if (u0.empty())
    u0.assign(p.horizon, Eigen::VectorXd::Zero(p.model.n_muscles()));
  IlqgOptions opts = options;
  opts.threads = resolve_threads(p.threads);
  IlqgResult r = ilqg_solve(ocp, u0, opts);

  Trajectory traj;
  traj.states.reserve(r.states.size());
  for (const auto& x : r.states) traj.states.push_back(unpack_state(p.model, x));
  traj.controls = std::move(r.controls);
  traj.cost = r.cost;
  traj.iterations = r.iterations;
  traj.status = std::move(r.status);
  traj.log = std::move(r.log);

  traj.term_costs.assign(p.terms.size(), 0.0);
  Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(p.model.n_muscles());
  for (int k = 0; k <= p.horizon; ++k) {
    StageCost sc = stage_cost(p, traj.states[k],
                              k < p.horizon ? traj.controls[k] : zero_u, k);
    for (size_t t = 0; t < sc.per_term.size(); ++t) traj.term_costs[t] += sc.per_term[t];
  }
  return traj;
}

Trajectory solve_receding(const TrackingProblem& p, int execute_steps,
                          const IlqgOptions& options) {
  validate(p);
  if (execute_steps < 1) throw InputError("receding execute count must be >= 1");

  Trajectory out;
  out.states.push_back(resolved_initial(p));
  std::vector<Eigen::VectorXd> warm;
  int t = 0;
  while (t < p.horizon) {
    int H = p.horizon - t;
    TrackingProblem sub = p;
    sub.horizon = H;
    sub.initial = out.states.back();
    sub.reference.positions.assign(p.reference.positions.begin() + t,
                                   p.reference.positions.end());
    sub.reference.velocities.assign(p.reference.velocities.begin() + t,
                                    p.reference.velocities.end());
    std::vector<Eigen::VectorXd> u0 = warm;
    u0.resize(H, Eigen::VectorXd::Zero(p.model.n_muscles()));
    Trajectory sol = solve_tracking(sub, u0, options);

    int take = std::min(execute_steps, H);
    for (int i = 0; i < take; ++i) {
      out.controls.push_back(sol.controls[i]);
      out.states.push_back(sol.states[i + 1]);
    }
    warm.assign(sol.controls.begin() + take, sol.controls.end());
    for (auto& rec : sol.log) rec.iteration += out.iterations;
    out.log.insert(out.log.end(), sol.log.begin(), sol.log.end());
    out.iterations += sol.iterations;
    out.status = sol.status;
    t += take;
  }

  out.term_costs.assign(p.terms.size(), 0.0);
  out.cost = 0.0;
  Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(p.model.n_muscles());
  for (int k = 0; k <= p.horizon; ++k) {
    StageCost sc =
        stage_cost(p, out.states[k], k < p.horizon ? out.controls[k] : zero_u, k);
    out.cost += sc.total;
    for (size_t ti = 0; ti < sc.per_term.size(); ++ti)
      out.term_costs[ti] += sc.per_term[ti];
  }
  return out;
}

std::vector<double> kinematic_error(const std::vector<std::vector<Vec2>>& sim,
                                    const std::vector<std::vector<Vec2>>& ref) {
  if (sim.size() != ref.size())
    throw InputError("kinematic error needs equal step counts");
  std::vector<double> out(sim.size());
  for (size_t k = 0; k < sim.size(); ++k) {
    if (sim[k].size() != ref[k].size() || sim[k].empty())
      throw InputError("kinematic error needs matching marker sets");
    double sum = 0.0;
    for (size_t m = 0; m < sim[k].size(); ++m) sum += (sim[k][m] - ref[k][m]).norm();
    out[k] = sum / static_cast<double>(sim[k].size());
  }
  return out;
}

std::vector<std::vector<Vec2>> trajectory_markers(
    const LimbModel& model, const std::vector<LimbState>& states) {
  std::vector<std::vector<Vec2>> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(marker_positions(model, s));
  return out;
}

MarkerReference rollout_reference(const LimbModel& model, const LimbState& initial,
                                  const std::vector<Eigen::VectorXd>& controls,
                                  double dt, ActivationMode mode) {
  MarkerReference ref;
  LimbState s = initial;
  ref.positions.push_back(marker_positions(model, s));
  ref.velocities.push_back(marker_velocities(model, s));
  for (const auto& u : controls) {
    s = step(model, s, u, dt, mode);
    ref.positions.push_back(marker_positions(model, s));
    ref.velocities.push_back(marker_velocities(model, s));
  }
  return ref;
}

void write_reference(const std::string& path, const LimbModel& model,
                     const MarkerReference& reference, double dt) {
  std::vector<std::string> header{"t"};
  for (const auto& marker : model.markers) {
    header.push_back(marker.name + ".x");
    header.push_back(marker.name + ".y");
    header.push_back(marker.name + ".vx");
    header.push_back(marker.name + ".vy");
  }
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < reference.positions.size(); ++k) {
    std::vector<double> row{static_cast<double>(k) * dt};
    for (int m = 0; m < model.n_markers(); ++m) {
      row.push_back(reference.positions[k][m].x());
      row.push_back(reference.positions[k][m].y());
      row.push_back(reference.velocities[k][m].x());
      row.push_back(reference.velocities[k][m].y());
    }
    rows.push_back(std::move(row));
  }
  write_csv_numeric(path, header, rows);
}

namespace {

int find_column(const CsvTable& table, const std::string& name) {
  for (size_t i = 0; i < table.header.size(); ++i)
    if (table.header[i] == name) return static_cast<int>(i);
  return -1;
}

int require_column(const CsvTable& table, const std::string& name,
                   const std::string& path) {
  int idx = find_column(table, name);
  if (idx < 0) throw InputError(path + ": missing column " + name);
  return idx;
}

}  // namespace

MarkerReference read_reference(const std::string& path, const LimbModel& model) {
  CsvTable table = read_csv(path);
  struct Cols {
    int x, y, vx, vy;
  };
  std::vector<Cols> cols;
  for (const auto& marker : model.markers)
    cols.push_back({require_column(table, marker.name + ".x", path),
                    require_column(table, marker.name + ".y", path),
                    require_column(table, marker.name + ".vx", path),
                    require_column(table, marker.name + ".vy", path)});
  MarkerReference ref;
  for (const auto& row : table.rows) {
    std::vector<Vec2> pos, vel;
    for (const auto& c : cols) {
      pos.emplace_back(parse_double(row[c.x], "reference value"),
                       parse_double(row[c.y], "reference value"));
      vel.emplace_back(parse_double(row[c.vx], "reference value"),
                       parse_double(row[c.vy], "reference value"));
    }
    ref.positions.push_back(std::move(pos));
    ref.velocities.push_back(std::move(vel));
  }
  return ref;
}

void write_trajectory(const std::string& path, const LimbModel& model,
                      const Trajectory& trajectory, double dt) {
  const int n = model.n_links(), m = model.n_muscles();
  std::vector<std::string> header{"t"};
  for (int i = 0; i < n; ++i) header.push_back("q" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("qd" + std::to_string(i));
  for (int i = 0; i < m; ++i) header.push_back("a" + std::to_string(i));
  for (int i = 0; i < m; ++i) header.push_back("u" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < trajectory.states.size(); ++k) {
    const LimbState& s = trajectory.states[k];
    std::vector<double> row{static_cast<double>(k) * dt};
    for (int i = 0; i < n; ++i) row.push_back(s.q[i]);
    for (int i = 0; i < n; ++i) row.push_back(s.qdot[i]);
    for (int i = 0; i < m; ++i) row.push_back(s.a[i]);
    // The final row has no control; zeros keep the table rectangular.
    for (int i = 0; i < m; ++i)
      row.push_back(k < trajectory.controls.size() ? trajectory.controls[k][i] : 0.0);
    rows.push_back(std::move(row));
  }
  write_csv_numeric(path, header, rows);
}

void write_trajectory_markers(const std::string& path, const LimbModel& model,
                              const Trajectory& trajectory, double dt) {
  MarkerReference ref;
  for (const auto& s : trajectory.states) {
    ref.positions.push_back(marker_positions(model, s));
    ref.velocities.push_back(marker_velocities(model, s));
  }
  write_reference(path, model, ref, dt);
}

void write_cost_log(const std::string& path, const Trajectory& trajectory) {
  std::vector<std::string> header{"iteration", "cost", "mu",
                                  "alpha",     "expected", "accepted"};
  std::vector<std::vector<double>> rows;
  for (const auto& rec : trajectory.log)
    rows.push_back({static_cast<double>(rec.iteration), rec.cost, rec.mu,
                    rec.alpha, rec.expected, rec.accepted ? 1.0 : 0.0});
  write_csv_numeric(path, header, rows);
}

void write_term_costs(const std::string& path, const TrackingProblem& problem,
                      const Trajectory& trajectory) {
  std::vector<std::string> header{"term", "residual", "norm", "p", "weight", "cost"};
  std::vector<std::vector<std::string>> rows;
  for (size_t t = 0; t < problem.terms.size(); ++t) {
    const CostTerm& term = problem.terms[t];
    rows.push_back({std::to_string(t), residual_name(term.residual),
                    norm_name(term.norm), format_g17(term.p),
                    format_g17(term.weight), format_g17(trajectory.term_costs[t])});
  }
  write_csv(path, header, rows);
}

void write_error_csv(const std::string& path, const std::vector<double>& error,
                     double dt) {
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < error.size(); ++k)
    rows.push_back({static_cast<double>(k) * dt, error[k]});
  write_csv_numeric(path, {"t", "error"}, rows);
}

MarkerSeries read_marker_series(const std::string& path) {
  CsvTable table = read_csv(path);
  MarkerSeries series;
  std::vector<std::pair<int, int>> cols;
  for (size_t i = 0; i < table.header.size(); ++i) {
    const std::string& col = table.header[i];
    if (col.size() > 2 && col.substr(col.size() - 2) == ".x") {
      std::string name = col.substr(0, col.size() - 2);
      int y = find_column(table, name + ".y");
      if (y < 0) throw InputError(path + ": missing column " + name + ".y");
      series.names.push_back(name);
      cols.emplace_back(static_cast<int>(i), y);
    }
  }
  if (series.names.empty())
    throw InputError(path + ": no marker position columns found");
  int t_col = find_column(table, "t");
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    series.times.push_back(t_col >= 0 ? parse_double(row[t_col], "time")
                                      : static_cast<double>(r));
    std::vector<Vec2> pos;
    for (const auto& [x, y] : cols)
      pos.emplace_back(parse_double(row[x], "marker value"),
                       parse_double(row[y], "marker value"));
    series.positions.push_back(std::move(pos));
  }
  return series;
}

TrackingProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open problem file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed problem file " + path + ": " + e.what());
  }

  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (dir / fp).string();
  };

  TrackingProblem problem;
  try {
    problem.model = load_model(resolve(j.at("model_path").get<std::string>()));
    problem.horizon = j.at("horizon").get<int>();
    problem.dt = j.at("dt").get<double>();
    problem.mode = mode_from_name(j.value("mode", std::string("smoothed")));
    if (j.contains("terms")) {
      problem.terms.clear();
      for (const auto& jt : j.at("terms")) {
        CostTerm term;
        term.residual = residual_from_name(jt.at("residual").get<std::string>());
        term.norm = norm_from_name(jt.at("norm").get<std::string>());
        term.p = jt.value("p", 0.0);
        term.weight = jt.at("weight").get<double>();
        problem.terms.push_back(term);
      }
    }
    if (j.contains("weights")) {
      const auto& jw = j.at("weights");
      if (jw.size() != problem.terms.size())
        throw InputError("weights array must match the term count");
      for (size_t i = 0; i < problem.terms.size(); ++i)
        problem.terms[i].weight = jw.at(i).get<double>();
    }
    if (j.contains("initial")) {
      const auto& ji = j.at("initial");
      auto read_vec = [&](const char* key) {
        const auto& ja = ji.at(key);
        Eigen::VectorXd v(ja.size());
        for (size_t i = 0; i < ja.size(); ++i) v[i] = ja.at(i).get<double>();
        return v;
      };
      problem.initial.q = read_vec("q");
      problem.initial.qdot = read_vec("qdot");
      problem.initial.a = read_vec("a");
    }
    problem.reference = read_reference(
        resolve(j.at("reference_path").get<std::string>()), problem.model);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed problem file " + path + ": " + e.what());
  }
  return problem;
}

}  // namespace tendonforge
