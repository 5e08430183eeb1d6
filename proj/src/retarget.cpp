#include "tendonforge/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "tendonforge/csv.hpp"
#include "tendonforge/threading.hpp"

namespace tendonforge {

void validate(const MocapClip& clip) {
  if (clip.frames.empty()) throw InputError("clip has no frames");
  if (!(clip.fps > 0.0)) throw InputError("clip frame rate must be positive");
  for (const auto& frame : clip.frames)
    for (const auto& [name, pos] : frame)
      if (!pos.allFinite())
        throw InputError("clip has a non-finite position for marker " + name);
}

namespace {

Eigen::VectorXd clamp_to_limits(const LimbModel& model, Eigen::VectorXd q) {
  for (int j = 0; j < model.n_links(); ++j)
    q[j] = std::clamp(q[j], model.links[j].lower, model.links[j].upper);
  return q;
}

std::vector<Vec2> markers_at(const LimbModel& model, const Eigen::VectorXd& q) {
  LimbState s;
  s.q = q;
  s.qdot = Eigen::VectorXd::Zero(model.n_links());
  s.a = Eigen::VectorXd::Zero(model.n_muscles());
  return marker_positions(model, s);
}

Eigen::VectorXd stacked_error(const LimbModel& model, const std::vector<int>& ids,
                              const std::vector<Vec3>& targets,
                              const Eigen::VectorXd& q) {
  std::vector<Vec2> pos = markers_at(model, q);
  Eigen::VectorXd e(3 * static_cast<int>(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) {
    const Vec2& p = pos[ids[i]];
    e.segment<3>(3 * static_cast<int>(i)) = targets[i] - Vec3(p.x(), p.y(), 0.0);
  }
  return e;
}

}  // namespace

IkResult ik_solve(const LimbModel& model, const std::vector<int>& marker_ids,
                  const std::vector<Vec3>& targets, const Eigen::VectorXd& q_init,
                  const IkOptions& options) {
  if (!(options.damping > 0.0)) throw InputError("ik damping must be positive");
  if (options.max_iterations < 1) throw InputError("ik needs at least one iteration");
  if (marker_ids.size() != targets.size())
    throw InputError("ik targets must match marker ids");
  for (int id : marker_ids)
    if (id < 0 || id >= model.n_markers())
      throw InputError("marker id out of range");
  const int n = model.n_links();
  if (q_init.size() != n) throw InputError("ik initial pose must match the model");

  IkResult out;
  out.q = clamp_to_limits(model, q_init);
  const int M = static_cast<int>(marker_ids.size());
  if (M == 0) return out;

  const double lam2 = options.damping * options.damping;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd e = stacked_error(model, marker_ids, targets, out.q);
    out.error_norm = e.norm();
    out.iterations = iter + 1;
    if (out.error_norm < options.tol_error) return out;

    std::vector<Eigen::MatrixXd> jacs = marker_jacobians(model, out.q);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3 * M, n);
    for (int i = 0; i < M; ++i) J.middleRows(3 * i, 2) = jacs[marker_ids[i]];

    Eigen::MatrixXd A = J * J.transpose();
    A.diagonal().array() += lam2;
    Eigen::VectorXd dq = J.transpose() * A.ldlt().solve(e);
    Eigen::VectorXd q_new = clamp_to_limits(model, out.q + dq);
    double step = (q_new - out.q).norm();
    out.q = std::move(q_new);
    if (step < options.tol_step) break;
  }
  out.error_norm = stacked_error(model, marker_ids, targets, out.q).norm();
  return out;
}

IkResult ik_solve(const LimbModel& model,
                  const std::map<std::string, Vec3>& targets,
                  const Eigen::VectorXd& q_init, const IkOptions& options) {
  std::vector<int> ids;
  std::vector<Vec3> pos;
  for (const auto& [name, p] : targets) {
    ids.push_back(marker_index(model, name));
    pos.push_back(p);
  }
  return ik_solve(model, ids, pos, q_init, options);
}

namespace {

// Marker ids present in each clip frame, resolved once up front.
struct FrameTargets {
  std::vector<int> ids;
  std::vector<Vec3> clip_pos;
};

std::vector<FrameTargets> resolve_frames(const LimbModel& model,
                                         const MocapClip& clip) {
  std::vector<FrameTargets> out(clip.frames.size());
  for (size_t f = 0; f < clip.frames.size(); ++f)
    for (const auto& [name, pos] : clip.frames[f]) {
      out[f].ids.push_back(marker_index(model, name));
      out[f].clip_pos.push_back(pos);
    }
  return out;
}

// Sum of squared capture-space errors with the model scaled up by s.
double capture_residual(const LimbModel& model,
                        const std::vector<FrameTargets>& frames,
                        const std::vector<Eigen::VectorXd>& poses, double s) {
  double total = 0.0;
  for (size_t f = 0; f < frames.size(); ++f) {
    std::vector<Vec2> pos = markers_at(model, poses[f]);
    for (size_t i = 0; i < frames[f].ids.size(); ++i) {
      const Vec2& p = pos[frames[f].ids[i]];
      total += (frames[f].clip_pos[i] - s * Vec3(p.x(), p.y(), 0.0)).squaredNorm();
    }
  }
  return total;
}

double fit_scale_resolved(const LimbModel& model,
                          const std::vector<FrameTargets>& frames,
                          const std::vector<Eigen::VectorXd>& poses,
                          bool forward_only) {
  double dot = 0.0, model_sq = 0.0, clip_sq = 0.0;
  for (size_t f = 0; f < frames.size(); ++f) {
    const size_t M = frames[f].ids.size();
    if (M == 0) continue;
    std::vector<Vec2> pos = markers_at(model, poses[f]);
    Vec3 cm = Vec3::Zero(), cc = Vec3::Zero();
    for (size_t i = 0; i < M; ++i) {
      const Vec2& p = pos[frames[f].ids[i]];
      cm += Vec3(p.x(), p.y(), 0.0);
      cc += frames[f].clip_pos[i];
    }
    cm /= static_cast<double>(M);
    cc /= static_cast<double>(M);
    for (size_t i = 0; i < M; ++i) {
      const Vec2& p = pos[frames[f].ids[i]];
      Vec3 m = Vec3(p.x(), p.y(), 0.0) - cm;
      Vec3 c = frames[f].clip_pos[i] - cc;
      dot += m.dot(c);
      model_sq += m.squaredNorm();
      clip_sq += c.squaredNorm();
    }
  }
  if (!(model_sq > 1e-30) || !(clip_sq > 1e-30))
    throw InputError("degenerate clip: no marker spread to fit a scale");
  // Forward fit scales the model onto the clip; the reverse fit inverted
  // lands in the same units, and their geometric mean reduces to the spread
  // ratio, independent of the cross term.
  double s = forward_only ? dot / model_sq : std::sqrt(clip_sq / model_sq);
  if (!(s > 0.0)) throw InputError("degenerate clip: non-positive scale fit");
  return s;
}

}  // namespace

double fit_scale(const LimbModel& model, const std::vector<Eigen::VectorXd>& poses,
                 const MocapClip& clip, bool forward_only) {
  validate(clip);
  if (poses.size() != clip.frames.size())
    throw InputError("scale fit needs one pose per frame");
  return fit_scale_resolved(model, resolve_frames(model, clip), poses, forward_only);
}

RetargetResult retarget(const LimbModel& model, const MocapClip& clip,
                        const RetargetOptions& options) {
  validate(clip);
  if (model.n_markers() < 1) throw InputError("retarget needs a model with markers");
  if (!(options.tolerance > 0.0)) throw InputError("tolerance must be positive");
  if (options.max_outer < 1) throw InputError("max_outer must be at least 1");

  const std::vector<FrameTargets> frames = resolve_frames(model, clip);
  const int F = clip.n_frames();
  const int threads = resolve_threads(options.threads);

  RetargetResult res;
  res.poses.assign(F, model.rest_pose);
  res.scale = 1.0;

  double prev_residual = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= options.max_outer; ++outer) {
    std::vector<Eigen::VectorXd> new_poses = res.poses;
    const double inv_s = 1.0 / res.scale;
    auto solve_frame = [&](int f, const Eigen::VectorXd& warm) {
      std::vector<Vec3> targets = frames[f].clip_pos;
      for (auto& t : targets) t *= inv_s;
      return ik_solve(model, frames[f].ids, targets, warm, options.ik).q;
    };
    if (options.parallel) {
      parallel_for(F, threads,
                   [&](int f) { new_poses[f] = solve_frame(f, res.poses[f]); });
    } else {
      for (int f = 0; f < F; ++f)
        new_poses[f] = solve_frame(f, f == 0 ? res.poses[0] : new_poses[f - 1]);
    }

    double s_new =
        fit_scale_resolved(model, frames, new_poses, options.forward_scale);
    double residual = capture_residual(model, frames, new_poses, s_new);
    bool accepted = residual <= prev_residual;
    res.log.push_back({outer, s_new, residual, accepted});
    res.outer_iterations = outer;
    if (!accepted) break;

    double ds = std::abs(s_new - res.scale);
    res.poses = std::move(new_poses);
    res.scale = s_new;
    prev_residual = residual;
    if (ds < options.tolerance) break;
  }

  res.residuals.assign(F, 0.0);
  const double inv_s = 1.0 / res.scale;
  for (int f = 0; f < F; ++f) {
    const size_t M = frames[f].ids.size();
    if (M == 0) continue;
    std::vector<Vec2> pos = markers_at(model, res.poses[f]);
    double sum = 0.0;
    for (size_t i = 0; i < M; ++i) {
      const Vec2& p = pos[frames[f].ids[i]];
      sum += (inv_s * frames[f].clip_pos[i] - Vec3(p.x(), p.y(), 0.0)).squaredNorm();
    }
    res.residuals[f] = std::sqrt(sum / static_cast<double>(M));
  }

  ground_clearance(res, model);
  return res;
}

void ground_clearance(RetargetResult& result, const LimbModel& model) {
  result.root_offsets.assign(result.poses.size(), 0.0);
  for (size_t f = 0; f < result.poses.size(); ++f) {
    std::vector<Vec2> pos = markers_at(model, result.poses[f]);
    double min_y = std::numeric_limits<double>::infinity();
    for (const Vec2& p : pos) min_y = std::min(min_y, p.y());
    if (std::isfinite(min_y)) result.root_offsets[f] = std::max(0.0, -min_y);
  }
}

MocapClip read_clip_csv(const std::string& path, double fps) {
  CsvTable table = read_csv(path);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < table.header.size(); ++i)
      if (table.header[i] == name) return static_cast<int>(i);
    throw InputError(path + ": missing column " + name);
  };
  int c_frame = col("frame"), c_marker = col("marker");
  int c_x = col("x"), c_y = col("y"), c_z = col("z");

  MocapClip clip;
  clip.fps = fps;
  for (const auto& row : table.rows) {
    long f = parse_long(row[c_frame], "frame index");
    if (f < 0) throw InputError("clip frame indices must be non-negative");
    if (static_cast<size_t>(f) >= clip.frames.size()) clip.frames.resize(f + 1);
    const std::string& name = row[c_marker];
    if (clip.frames[f].count(name))
      throw InputError("duplicate marker row: frame " + std::to_string(f) +
                       " marker " + name);
    clip.frames[f][name] = Vec3(parse_double(row[c_x], "marker position"),
                                parse_double(row[c_y], "marker position"),
                                parse_double(row[c_z], "marker position"));
  }
  validate(clip);
  return clip;
}

void write_clip_csv(const std::string& path, const MocapClip& clip) {
  std::vector<std::vector<std::string>> rows;
  for (size_t f = 0; f < clip.frames.size(); ++f)
    for (const auto& [name, pos] : clip.frames[f])
      rows.push_back({std::to_string(f), name, format_g17(pos.x()),
                      format_g17(pos.y()), format_g17(pos.z())});
  write_csv(path, {"frame", "marker", "x", "y", "z"}, rows);
}

MocapClip read_clip_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open clip file: " + path);
  nlohmann::json j;
  try {
    in >> j;
    MocapClip clip;
    clip.fps = j.value("fps", 60.0);
    for (const auto& jf : j.at("frames")) {
      std::map<std::string, Vec3> frame;
      for (const auto& [name, jp] : jf.items())
        frame[name] = Vec3(jp.at(0).get<double>(), jp.at(1).get<double>(),
                           jp.at(2).get<double>());
      clip.frames.push_back(std::move(frame));
    }
    validate(clip);
    return clip;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed clip file " + path + ": " + e.what());
  }
}

void write_clip_json(const std::string& path, const MocapClip& clip) {
  nlohmann::ordered_json j;
  j["fps"] = clip.fps;
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto& frame : clip.frames) {
    nlohmann::ordered_json jf = nlohmann::ordered_json::object();
    for (const auto& [name, pos] : frame) jf[name] = {pos.x(), pos.y(), pos.z()};
    j["frames"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write clip file: " + path);
  out << j.dump(2) << "\n";
}

MocapClip load_clip(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return read_clip_csv(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return read_clip_json(path);
  throw InputError("unsupported clip format (expected .csv or .json): " + path);
}

void write_result_csv(const std::string& path, const RetargetResult& result) {
  int n = result.poses.empty() ? 0 : static_cast<int>(result.poses[0].size());
  std::vector<std::string> header{"frame"};
  for (int i = 0; i < n; ++i) header.push_back("q" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (size_t f = 0; f < result.poses.size(); ++f) {
    std::vector<double> row{static_cast<double>(f)};
    for (int i = 0; i < n; ++i) row.push_back(result.poses[f][i]);
    rows.push_back(std::move(row));
  }
  write_csv_numeric(path, header, rows);
}

void write_result_metadata(const std::string& path, const RetargetResult& result) {
  nlohmann::ordered_json j;
  j["scale"] = result.scale;
  j["residuals"] = result.residuals;
  j["iterations"] = result.outer_iterations;
  j["root_offsets"] = result.root_offsets;
  j["log"] = nlohmann::ordered_json::array();
  for (const auto& rec : result.log)
    j["log"].push_back({{"iteration", rec.iteration},
                        {"scale", rec.scale},
                        {"total_residual", rec.total_residual},
                        {"accepted", rec.accepted}});
  std::ofstream out(path);
  if (!out) throw InputError("cannot write metadata file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace tendonforge
