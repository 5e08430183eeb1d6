#include "tendonforge/limb.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "chain.hpp"

namespace tendonforge {

using detail::Chain;
using detail::chain_point;
using detail::com_position;
using detail::make_chain;
using detail::point_jacobian;

namespace detail {

std::vector<Vec2> muscle_points(const Chain& c, const LimbMuscle& muscle) {
  std::vector<Vec2> pts;
  pts.reserve(muscle.path.size());
  for (const auto& site : muscle.path)
    pts.push_back(chain_point(c, site.link, site.offset));
  return pts;
}

void muscle_path_geometry(const Chain& c, const LimbMuscle& muscle,
                          double& length, Eigen::VectorXd& dL,
                          Eigen::MatrixXd* H) {
  const int n = c.n;
  std::vector<Vec2> pts = muscle_points(c, muscle);
  length = 0.0;
  dL = Eigen::VectorXd::Zero(n);
  if (H) *H = Eigen::MatrixXd::Zero(n, n);

  Eigen::MatrixXd D(2, n);
  for (size_t s = 0; s + 1 < pts.size(); ++s) {
    const Vec2 &p0 = pts[s], &p1 = pts[s + 1];
    int l0 = muscle.path[s].link, l1 = muscle.path[s + 1].link;
    Vec2 d = p1 - p0;
    double len = d.norm();
    if (len < 1e-12) continue;  // coincident sites contribute nothing
    length += len;
    Vec2 u = d / len;
    for (int j = 0; j < n; ++j)
      D.col(j) = detail::dpoint(c, p1, l1, j) - detail::dpoint(c, p0, l0, j);
    dL += D.transpose() * u;
    if (!H) continue;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= j; ++k) {
        Vec2 hd = detail::d2point(c, p1, l1, j, k) - detail::d2point(c, p0, l0, j, k);
        double uDj = u.dot(D.col(j)), uDk = u.dot(D.col(k));
        double val = u.dot(hd) + (D.col(j).dot(D.col(k)) - uDj * uDk) / len;
        (*H)(j, k) += val;
        if (j != k) (*H)(k, j) += val;
      }
  }
}

double limit_torque(const LimbModel& model, int joint, double q) {
  const LinkParams& link = model.links[joint];
  double below = std::max(0.0, link.lower - q);
  double above = std::max(0.0, q - link.upper);
  return model.limit_stiffness * (below * below * below - above * above * above);
}

double limit_torque_dq(const LimbModel& model, int joint, double q) {
  const LinkParams& link = model.links[joint];
  double below = std::max(0.0, link.lower - q);
  double above = std::max(0.0, q - link.upper);
  return -3.0 * model.limit_stiffness * (below * below + above * above);
}

}  // namespace detail

void finalize_model(LimbModel& model) {
  const int n = model.n_links();
  if (n < 1) throw InputError("model needs at least one link");
  if (!std::isfinite(model.base_angle)) throw InputError("base_angle must be finite");
  if (!(model.gravity >= 0.0)) throw InputError("gravity must be >= 0");
  if (!(model.damping >= 0.0)) throw InputError("damping must be >= 0");
  if (!(model.limit_stiffness >= 0.0))
    throw InputError("limit_stiffness must be >= 0");
  for (const auto& link : model.links) {
    if (!(link.length > 0.0)) throw InputError("link length must be positive");
    if (!(link.mass > 0.0)) throw InputError("link mass must be positive");
    if (!(link.inertia > 0.0)) throw InputError("link inertia must be positive");
    if (!(link.com >= 0.0 && link.com <= link.length))
      throw InputError("link com must lie within the link");
    if (!(link.lower < link.upper))
      throw InputError("joint limits must satisfy lower < upper");
  }
  if (model.rest_pose.size() == 0) model.rest_pose = Eigen::VectorXd::Zero(n);
  if (model.rest_pose.size() != n)
    throw InputError("rest_pose size must match the link count");

  std::set<std::string> names;
  for (const auto& marker : model.markers) {
    if (marker.link < 0 || marker.link >= n)
      throw InputError("marker link out of range: " + marker.name);
    if (!marker.offset.allFinite()) throw InputError("marker offset must be finite");
    if (!names.insert(marker.name).second)
      throw InputError("duplicate marker name: " + marker.name);
  }

  names.clear();
  for (auto& muscle : model.muscles) {
    if (muscle.path.size() < 2)
      throw InputError("muscle path needs at least 2 sites: " + muscle.params.name);
    int lo = n, hi = -2;
    for (const auto& site : muscle.path) {
      if (site.link < -1 || site.link >= n)
        throw InputError("muscle site link out of range: " + muscle.params.name);
      if (!site.offset.allFinite())
        throw InputError("muscle site offset must be finite");
      lo = std::min(lo, site.link);
      hi = std::max(hi, site.link);
    }
    if (lo == hi)
      throw InputError("muscle must span at least one joint: " + muscle.params.name);
    if (!names.insert(muscle.params.name).second)
      throw InputError("duplicate muscle name: " + muscle.params.name);
  }

  if (model.muscles.empty()) return;

  // Rest-pose geometry drives length normalization and f0 calibration.
  Chain chain = make_chain(model, model.rest_pose);
  Eigen::LLT<Eigen::MatrixXd> llt(mass_matrix(model, model.rest_pose));
  if (llt.info() != Eigen::Success) throw SolverError("singular mass matrix");
  for (auto& muscle : model.muscles) {
    Eigen::VectorXd dL;
    detail::muscle_path_geometry(chain, muscle, muscle.rest_length, dL, nullptr);
    if (!(muscle.rest_length > 1e-9))
      throw InputError("muscle has zero rest length: " + muscle.params.name);
    muscle.acc0 = llt.solve(dL).norm();
    if (muscle.scale > 0.0)
      muscle.params.f0 = estimate_f0(muscle.scale, muscle.acc0);
    validate(muscle.params);
  }
}

int marker_index(const LimbModel& model, const std::string& name) {
  for (int i = 0; i < model.n_markers(); ++i)
    if (model.markers[i].name == name) return i;
  throw InputError("unknown marker: " + name);
}

LimbState rest_state(const LimbModel& model) {
  LimbState s;
  s.q = model.rest_pose;
  s.qdot = Eigen::VectorXd::Zero(model.n_links());
  s.a = Eigen::VectorXd::Zero(model.n_muscles());
  return s;
}

Eigen::VectorXd pack_state(const LimbState& state) {
  Eigen::VectorXd x(state.q.size() + state.qdot.size() + state.a.size());
  x << state.q, state.qdot, state.a;
  return x;
}

LimbState unpack_state(const LimbModel& model, const Eigen::VectorXd& x) {
  const int n = model.n_links(), m = model.n_muscles();
  if (x.size() != 2 * n + m) throw InputError("state vector size mismatch");
  LimbState s;
  s.q = x.segment(0, n);
  s.qdot = x.segment(n, n);
  s.a = x.segment(2 * n, m);
  return s;
}

std::vector<Vec2> joint_positions(const LimbModel& model, const Eigen::VectorXd& q) {
  return make_chain(model, q).joints;
}

Vec2 site_position(const LimbModel& model, const Eigen::VectorXd& q, int link,
                   const Vec2& offset) {
  return chain_point(make_chain(model, q), link, offset);
}

std::vector<MuscleGeometry> muscle_geometry(const LimbModel& model,
                                            const Eigen::VectorXd& q) {
  Chain chain = make_chain(model, q);
  std::vector<MuscleGeometry> out(model.n_muscles());
  for (int m = 0; m < model.n_muscles(); ++m) {
    const LimbMuscle& muscle = model.muscles[m];
    if (!(muscle.rest_length > 0.0))
      throw InputError("model not finalized: missing muscle rest length");
    detail::muscle_path_geometry(chain, muscle, out[m].length, out[m].dLdq,
                                 nullptr);
    out[m].norm_length = out[m].length / muscle.rest_length;
  }
  return out;
}

std::vector<Vec2> marker_positions(const LimbModel& model, const LimbState& state) {
  Chain chain = make_chain(model, state.q);
  std::vector<Vec2> out;
  out.reserve(model.markers.size());
  for (const auto& marker : model.markers)
    out.push_back(chain_point(chain, marker.link, marker.offset));
  return out;
}

std::vector<Vec2> marker_velocities(const LimbModel& model, const LimbState& state) {
  Chain chain = make_chain(model, state.q);
  std::vector<Vec2> out;
  out.reserve(model.markers.size());
  for (const auto& marker : model.markers) {
    Vec2 p = chain_point(chain, marker.link, marker.offset);
    out.push_back(point_jacobian(chain, p, marker.link) * state.qdot);
  }
  return out;
}

std::vector<Eigen::MatrixXd> marker_jacobians(const LimbModel& model,
                                              const Eigen::VectorXd& q) {
  Chain chain = make_chain(model, q);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(model.markers.size());
  for (const auto& marker : model.markers) {
    Vec2 p = chain_point(chain, marker.link, marker.offset);
    out.push_back(point_jacobian(chain, p, marker.link));
  }
  return out;
}

Eigen::MatrixXd mass_matrix(const LimbModel& model, const Eigen::VectorXd& q) {
  const int n = model.n_links();
  Chain chain = make_chain(model, q);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Vec2 ci = com_position(model, chain, i);
    Eigen::MatrixXd Jc = point_jacobian(chain, ci, i);
    M += model.links[i].mass * Jc.transpose() * Jc;
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k <= i; ++k) M(j, k) += model.links[i].inertia;
  }
  return M;
}

Eigen::VectorXd bias_forces(const LimbModel& model, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qdot) {
  const int n = model.n_links();
  Chain chain = make_chain(model, q);
  Vec2 g_vec(0.0, -model.gravity);
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    Vec2 ci = com_position(model, chain, i);
    Eigen::MatrixXd Jc = point_jacobian(chain, ci, i);
    Vec2 conv = Vec2::Zero();
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k <= i; ++k)
        conv += qdot[j] * qdot[k] * detail::d2point(chain, ci, i, j, k);
    bias += model.links[i].mass * (Jc.transpose() * (conv - g_vec));
  }
  return bias;
}

Eigen::VectorXd applied_torques(const LimbModel& model, const LimbState& state) {
  const int n = model.n_links();
  Eigen::VectorXd tau = -model.damping * state.qdot;
  for (int j = 0; j < n; ++j) tau[j] += detail::limit_torque(model, j, state.q[j]);
  auto geos = muscle_geometry(model, state.q);
  for (int m = 0; m < model.n_muscles(); ++m) {
    const LimbMuscle& muscle = model.muscles[m];
    double vel = geos[m].dLdq.dot(state.qdot) / muscle.rest_length;
    double tension =
        muscle.params.f0 * flv(muscle.params, geos[m].norm_length, vel, state.a[m]);
    tau -= tension * geos[m].dLdq;  // tension pulls the path shorter
  }
  return tau;
}

ForwardDynamics forward_dynamics(const LimbModel& model, const LimbState& state,
                                 const Eigen::VectorXd& u, ActivationMode mode) {
  if (u.size() != model.n_muscles()) throw InputError("excitation size mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(mass_matrix(model, state.q));
  if (llt.info() != Eigen::Success) throw SolverError("singular mass matrix");
  ForwardDynamics out;
  out.qddot =
      llt.solve(applied_torques(model, state) - bias_forces(model, state.q, state.qdot));
  out.activation_rates.resize(model.n_muscles());
  for (int m = 0; m < model.n_muscles(); ++m) {
    const MuscleParams& p = model.muscles[m].params;
    double tau = mode == ActivationMode::smoothed ? tau_smoothed(u[m], state.a[m], p)
                                                  : tau_switched(u[m], state.a[m], p);
    out.activation_rates[m] = (u[m] - state.a[m]) / tau;
  }
  return out;
}

LimbState step(const LimbModel& model, const LimbState& state,
               const Eigen::VectorXd& u, double dt, ActivationMode mode) {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  ForwardDynamics fd = forward_dynamics(model, state, u, mode);
  LimbState next;
  next.qdot = state.qdot + dt * fd.qddot;
  next.q = state.q + dt * next.qdot;
  next.a.resize(model.n_muscles());
  for (int m = 0; m < model.n_muscles(); ++m)
    next.a[m] =
        step_activation(u[m], state.a[m], dt, model.muscles[m].params, mode);
  if (!next.q.allFinite() || !next.qdot.allFinite() || !next.a.allFinite())
    throw SolverError("diverged");
  return next;
}

double total_energy(const LimbModel& model, const LimbState& state) {
  const int n = model.n_links();
  Chain chain = make_chain(model, state.q);
  double energy = 0.0;
  double theta_dot = 0.0;
  for (int i = 0; i < n; ++i) {
    theta_dot += state.qdot[i];
    Vec2 ci = com_position(model, chain, i);
    Vec2 vel = point_jacobian(chain, ci, i) * state.qdot;
    energy += 0.5 * model.links[i].mass * vel.squaredNorm() +
              0.5 * model.links[i].inertia * theta_dot * theta_dot +
              model.links[i].mass * model.gravity * ci.y();
  }
  for (int j = 0; j < n; ++j) {
    const LinkParams& link = model.links[j];
    double below = std::max(0.0, link.lower - state.q[j]);
    double above = std::max(0.0, state.q[j] - link.upper);
    energy += 0.25 * model.limit_stiffness *
              (below * below * below * below + above * above * above * above);
  }
  return energy;
}

namespace {

nlohmann::ordered_json vec2_json(const Vec2& v) { return {v.x(), v.y()}; }

Vec2 vec2_from(const nlohmann::json& j) {
  return Vec2(j.at(0).get<double>(), j.at(1).get<double>());
}

}  // namespace

nlohmann::ordered_json model_to_json(const LimbModel& model) {
  nlohmann::ordered_json j;
  j["name"] = model.name;
  j["base_angle"] = model.base_angle;
  j["gravity"] = model.gravity;
  j["damping"] = model.damping;
  j["limit_stiffness"] = model.limit_stiffness;
  auto& links = j["links"] = nlohmann::ordered_json::array();
  for (const auto& link : model.links) {
    nlohmann::ordered_json jl;
    jl["length"] = link.length;
    jl["mass"] = link.mass;
    jl["inertia"] = link.inertia;
    jl["com"] = link.com;
    jl["lower"] = link.lower;
    jl["upper"] = link.upper;
    links.push_back(std::move(jl));
  }
  auto& muscles = j["muscles"] = nlohmann::ordered_json::array();
  for (const auto& muscle : model.muscles) {
    nlohmann::ordered_json jm;
    jm["name"] = muscle.params.name;
    if (muscle.scale > 0.0)
      jm["scale"] = muscle.scale;
    else
      jm["f0"] = muscle.params.f0;
    jm["tau_a"] = muscle.params.tau_a;
    jm["tau_d"] = muscle.params.tau_d;
    jm["tau_smooth"] = muscle.params.tau_smooth;
    jm["v_max"] = muscle.params.v_max;
    auto& path = jm["path"] = nlohmann::ordered_json::array();
    for (const auto& site : muscle.path) {
      nlohmann::ordered_json js;
      js["link"] = site.link;
      js["offset"] = vec2_json(site.offset);
      path.push_back(std::move(js));
    }
    muscles.push_back(std::move(jm));
  }
  auto& markers = j["markers"] = nlohmann::ordered_json::array();
  for (const auto& marker : model.markers) {
    nlohmann::ordered_json jk;
    jk["link"] = marker.link;
    jk["offset"] = vec2_json(marker.offset);
    jk["name"] = marker.name;
    markers.push_back(std::move(jk));
  }
  auto& rest = j["rest_pose"] = nlohmann::ordered_json::array();
  for (int i = 0; i < model.rest_pose.size(); ++i) rest.push_back(model.rest_pose[i]);
  return j;
}

LimbModel model_from_json(const nlohmann::json& j) {
  LimbModel model;
  try {
    model.name = j.value("name", std::string("limb"));
    model.base_angle = j.value("base_angle", 0.0);
    model.gravity = j.value("gravity", 9.81);
    model.damping = j.value("damping", 0.1);
    model.limit_stiffness = j.value("limit_stiffness", 100.0);
    for (const auto& jl : j.at("links")) {
      LinkParams link;
      link.length = jl.at("length").get<double>();
      link.mass = jl.at("mass").get<double>();
      link.inertia = jl.at("inertia").get<double>();
      link.com = jl.value("com", link.length / 2.0);
      link.lower = jl.at("lower").get<double>();
      link.upper = jl.at("upper").get<double>();
      model.links.push_back(link);
    }
    for (const auto& jm : j.value("muscles", nlohmann::json::array())) {
      LimbMuscle muscle;
      muscle.params.name = jm.at("name").get<std::string>();
      bool has_f0 = jm.contains("f0"), has_scale = jm.contains("scale");
      if (has_f0 == has_scale)
        throw InputError("muscle must declare exactly one of f0 and scale: " +
                         muscle.params.name);
      if (has_f0)
        muscle.params.f0 = jm.at("f0").get<double>();
      else
        muscle.scale = jm.at("scale").get<double>();
      muscle.params.tau_a = jm.value("tau_a", 0.01);
      muscle.params.tau_d = jm.value("tau_d", 0.04);
      muscle.params.tau_smooth = jm.value("tau_smooth", 0.01);
      muscle.params.v_max = jm.value("v_max", 10.0);
      for (const auto& js : jm.at("path")) {
        PathPoint site;
        site.link = js.at("link").get<int>();
        site.offset = vec2_from(js.at("offset"));
        muscle.path.push_back(site);
      }
      model.muscles.push_back(std::move(muscle));
    }
    for (const auto& jk : j.value("markers", nlohmann::json::array())) {
      LimbMarker marker;
      marker.link = jk.at("link").get<int>();
      marker.offset = vec2_from(jk.at("offset"));
      marker.name = jk.at("name").get<std::string>();
      model.markers.push_back(std::move(marker));
    }
    if (j.contains("rest_pose")) {
      const auto& jr = j.at("rest_pose");
      model.rest_pose.resize(jr.size());
      for (size_t i = 0; i < jr.size(); ++i)
        model.rest_pose[i] = jr.at(i).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
  finalize_model(model);
  return model;
}

LimbModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

void save_model(const LimbModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

}  // namespace tendonforge
