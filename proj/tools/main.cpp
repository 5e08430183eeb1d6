#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tendonforge/csv.hpp"
#include "tendonforge/demo.hpp"
#include "tendonforge/loa.hpp"
#include "tendonforge/primitives.hpp"
#include "tendonforge/retarget.hpp"
#include "tendonforge/slice.hpp"
#include "tendonforge/threading.hpp"
#include "tendonforge/tracking.hpp"

using namespace tendonforge;
namespace fs = std::filesystem;

namespace {

std::optional<Vec3> parse_axis(const std::string& text) {
  if (text.empty() || text == "auto") return std::nullopt;
  if (text == "x") return Vec3::UnitX();
  if (text == "y") return Vec3::UnitY();
  if (text == "z") return Vec3::UnitZ();
  std::vector<double> parts;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) parts.push_back(parse_double(token, "axis"));
  if (parts.size() != 3)
    throw InputError("axis must be x, y, z, auto, or three comma-separated numbers");
  return Vec3(parts[0], parts[1], parts[2]);
}

// name=path, or a bare path whose stem becomes the name.
std::pair<std::string, std::string> parse_named_path(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos) return {fs::path(text).stem().string(), text};
  if (eq == 0) throw InputError("empty name in " + text);
  return {text.substr(0, eq), text.substr(eq + 1)};
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << j.dump(2) << "\n";
}

struct LoaJob {
  std::vector<std::pair<std::string, std::string>> muscles;  // name, mesh path
  std::vector<std::pair<std::string, std::string>> bones;
  LoaConfig config;
  std::string out_dir = ".";
  std::optional<Vec3> axis;  // unset: principal axis per muscle
  bool dump_slices = false;
};

void load_loa_config(const std::string& path, LoaJob& job) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
    fs::path dir = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
      fs::path fp(p);
      return fp.is_absolute() ? fp.string() : (dir / fp).string();
    };
    if (j.contains("out_dir"))
      job.out_dir = resolve(j.at("out_dir").get<std::string>());
    if (j.contains("axis")) {
      const auto& ja = j.at("axis");
      if (ja.is_string())
        job.axis = parse_axis(ja.get<std::string>());
      else
        job.axis = Vec3(ja.at(0).get<double>(), ja.at(1).get<double>(),
                        ja.at(2).get<double>());
    }
    if (j.contains("loa")) {
      const auto& jl = j.at("loa");
      job.config.max_dist = jl.value("max_dist", job.config.max_dist);
      job.config.min_dist_new_bone =
          jl.value("min_dist_new_bone", job.config.min_dist_new_bone);
      job.config.n_slices_per_meter =
          jl.value("n_slices_per_meter", job.config.n_slices_per_meter);
    }
    for (const auto& jm : j.value("muscles", nlohmann::json::array())) {
      std::string mesh = resolve(jm.at("mesh").get<std::string>());
      std::string name = jm.value("name", fs::path(mesh).stem().string());
      job.muscles.emplace_back(name, mesh);
    }
    for (const auto& jb : j.value("bones", nlohmann::json::array())) {
      std::string mesh = resolve(jb.at("mesh").get<std::string>());
      std::string name = jb.value("name", fs::path(mesh).stem().string());
      job.bones.emplace_back(name, mesh);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed config file " + path + ": " + e.what());
  }
}

int run_extract_loa(const LoaJob& job) {
  if (job.muscles.empty()) throw InputError("no muscle meshes given");
  if (job.bones.empty()) throw InputError("no bone meshes given");
  validate(job.config);

  std::vector<TriMesh> bone_meshes;
  for (const auto& [name, path] : job.bones) {
    TriMesh mesh = load_mesh(path);
    mesh.name = name;
    bone_meshes.push_back(std::move(mesh));
  }
  BoneIndex skeleton(bone_meshes);

  fs::create_directories(job.out_dir);
  for (const auto& [name, path] : job.muscles) {
    TriMesh muscle = load_mesh(path);
    muscle.name = name;
    Vec3 axis = job.axis ? *job.axis : principal_axis(muscle);
    TendonPath tendon = extract_loa(skeleton, muscle, axis, job.config);
    fs::path out = fs::path(job.out_dir) / (name + ".tendon.json");
    write_json_file(out, tendon_to_json(tendon));
    if (job.dump_slices) {
      auto contours = slice_mesh(muscle, tendon.axis, tendon.n_slices);
      write_json_file(fs::path(job.out_dir) / (name + ".slices.json"),
                      slice_dump(contours));
    }
    std::cout << name << ": " << tendon.sites.size() << " sites ("
              << tendon.wrapping_candidates.size() << " wrapping candidates)\n";
  }
  return 0;
}

int run_retarget(const std::string& model_path, const std::string& clip_path,
                 const std::string& out_dir, const RetargetOptions& options,
                 double fps) {
  LimbModel model = load_model(model_path);
  MocapClip clip;
  if (clip_path.size() >= 4 &&
      clip_path.substr(clip_path.size() - 4) == ".csv")
    clip = read_clip_csv(clip_path, fps);
  else
    clip = load_clip(clip_path);

  RetargetResult result = retarget(model, clip, options);
  fs::create_directories(out_dir);
  write_result_csv((fs::path(out_dir) / "poses.csv").string(), result);
  write_result_metadata((fs::path(out_dir) / "metadata.json").string(), result);

  double mean_res = 0.0;
  for (double r : result.residuals) mean_res += r;
  if (!result.residuals.empty()) mean_res /= result.residuals.size();
  std::cout << "scale: " << result.scale << "\n"
            << "outer iterations: " << result.outer_iterations << "\n"
            << "mean residual: " << mean_res << " m\n";
  return 0;
}

void write_track_outputs(const std::string& out_dir, const TrackingProblem& p,
                         const Trajectory& traj) {
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  write_trajectory((dir / "trajectory.csv").string(), p.model, traj, p.dt);
  write_cost_log((dir / "costs.csv").string(), traj);
  write_trajectory_markers((dir / "markers.csv").string(), p.model, traj, p.dt);
  write_term_costs((dir / "terms.csv").string(), p, traj);

  std::vector<double> error = kinematic_error(
      trajectory_markers(p.model, traj.states), p.reference.positions);
  write_error_csv((dir / "error.csv").string(), error, p.dt);

  double mean = 0.0, peak = 0.0;
  for (double e : error) {
    mean += e;
    peak = std::max(peak, e);
  }
  mean /= error.empty() ? 1.0 : static_cast<double>(error.size());
  std::cout << "status: " << traj.status << "\n"
            << "iterations: " << traj.iterations << "\n"
            << "final cost: " << traj.cost << "\n"
            << "kinematic error mean " << mean << " m, max " << peak << " m\n";
}

int run_track(const std::string& problem_path, const std::string& out_dir,
              const std::string& mode, int threads, int receding,
              int max_iterations, int horizon, double dt) {
  TrackingProblem p = load_problem(problem_path);
  if (!mode.empty()) p.mode = mode_from_name(mode);
  if (threads > 0) p.threads = threads;
  if (dt > 0.0) p.dt = dt;
  if (horizon > 0) {
    if (static_cast<size_t>(horizon) + 1 > p.reference.positions.size())
      throw InputError("reference too short for the requested horizon");
    p.horizon = horizon;
    p.reference.positions.resize(horizon + 1);
    p.reference.velocities.resize(horizon + 1);
  }

  IlqgOptions options;
  if (max_iterations > 0) options.max_iterations = max_iterations;
  Trajectory traj = receding > 0 ? solve_receding(p, receding, options)
                                 : solve_tracking(p, {}, options);
  write_track_outputs(out_dir, p, traj);
  return 0;
}

std::vector<double> series_error(const MarkerSeries& a, const MarkerSeries& b) {
  if (a.names.size() != b.names.size())
    throw InputError("marker sets differ between the two files");
  std::vector<int> remap(a.names.size());
  for (size_t i = 0; i < a.names.size(); ++i) {
    auto it = std::find(b.names.begin(), b.names.end(), a.names[i]);
    if (it == b.names.end())
      throw InputError("marker sets differ: " + a.names[i] +
                       " missing from the second file");
    remap[i] = static_cast<int>(it - b.names.begin());
  }
  if (a.positions.size() != b.positions.size())
    throw InputError("marker files have different step counts");
  std::vector<double> out(a.positions.size());
  for (size_t k = 0; k < a.positions.size(); ++k) {
    double sum = 0.0;
    for (size_t i = 0; i < a.names.size(); ++i)
      sum += (a.positions[k][i] - b.positions[k][remap[i]]).norm();
    out[k] = sum / static_cast<double>(a.names.size());
  }
  return out;
}

int run_metrics(const std::string& actual, const std::string& expected,
                const std::string& out_path) {
  MarkerSeries a = read_marker_series(actual);
  MarkerSeries b = read_marker_series(expected);
  std::vector<double> error = series_error(a, b);

  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < error.size(); ++k) rows.push_back({a.times[k], error[k]});
  write_csv_numeric(out_path, {"t", "error"}, rows);

  double mean = 0.0, peak = 0.0;
  for (double e : error) {
    mean += e;
    peak = std::max(peak, e);
  }
  mean /= error.empty() ? 1.0 : static_cast<double>(error.size());
  std::cout << "kinematic error mean " << mean << " m, max " << peak << " m\n";
  return 0;
}

int run_demo(const std::string& out_dir, int horizon, double dt, int frames,
             int threads) {
  DemoFixtures fx = write_demo_fixtures(out_dir, horizon, dt, frames);
  std::cout << "fixtures written to " << out_dir << "\n";

  LoaJob job;
  job.out_dir = out_dir;
  job.axis = Vec3::UnitX();
  job.muscles.emplace_back("demo_muscle", fx.muscle_mesh);
  for (const auto& path : fx.bone_meshes)
    job.bones.emplace_back(fs::path(path).stem().string(), path);
  run_extract_loa(job);

  RetargetOptions ropt;
  ropt.threads = threads;
  run_retarget(fx.model, fx.clip_csv, out_dir, ropt, 60.0);

  run_track(fx.problem, out_dir, "", threads, 0, 0, 0, 0.0);

  fs::path dir(out_dir);
  return run_metrics((dir / "markers.csv").string(), fx.reference,
                     (dir / "metrics.csv").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tendon-forge: line-of-action extraction, muscle simulation, "
               "motion tracking, and retargeting for planar limb models"};
  app.require_subcommand(1);

  // extract-loa
  auto* loa_cmd = app.add_subcommand(
      "extract-loa", "Slice muscle meshes into tendon site paths");
  std::string loa_config, loa_out, loa_axis, loa_name;
  std::vector<std::string> loa_meshes, loa_bones;
  double loa_max_dist = -1.0, loa_min_dist = -1.0, loa_spm = -1.0;
  bool loa_dump = false;
  loa_cmd->add_option("--config", loa_config, "Job description JSON");
  loa_cmd->add_option("--mesh", loa_meshes, "Muscle mesh (repeatable)");
  loa_cmd->add_option("--name", loa_name,
                      "Muscle name override (single --mesh only)");
  loa_cmd->add_option("--bone", loa_bones, "Bone mesh as name=path (repeatable)");
  loa_cmd->add_option("--out", loa_out, "Output directory");
  loa_cmd->add_option("--axis", loa_axis, "x|y|z|auto|ax,ay,az");
  loa_cmd->add_option("--max-dist", loa_max_dist,
                      "Waypoint spacing threshold (m); 0 keeps every slice");
  loa_cmd->add_option("--min-dist-new-bone", loa_min_dist,
                      "Spacing required at a bone change (m)");
  loa_cmd->add_option("--slices-per-meter", loa_spm, "Slice density");
  loa_cmd->add_flag("--dump-slices", loa_dump, "Also write per-slice centroids");
  loa_cmd->callback([&] {
    LoaJob job;
    if (!loa_config.empty()) load_loa_config(loa_config, job);
    if (!loa_meshes.empty()) {
      job.muscles.clear();
      for (const auto& mesh : loa_meshes)
        job.muscles.emplace_back(fs::path(mesh).stem().string(), mesh);
      if (!loa_name.empty()) {
        if (job.muscles.size() != 1)
          throw InputError("--name needs exactly one --mesh");
        job.muscles[0].first = loa_name;
      }
    }
    if (!loa_bones.empty()) {
      job.bones.clear();
      for (const auto& bone : loa_bones) job.bones.push_back(parse_named_path(bone));
    }
    if (!loa_out.empty()) job.out_dir = loa_out;
    if (!loa_axis.empty()) job.axis = parse_axis(loa_axis);
    if (loa_max_dist >= 0.0) job.config.max_dist = loa_max_dist;
    if (loa_min_dist >= 0.0) job.config.min_dist_new_bone = loa_min_dist;
    if (loa_spm >= 0.0) job.config.n_slices_per_meter = loa_spm;
    job.dump_slices = loa_dump;
    run_extract_loa(job);
  });

  // retarget
  auto* ret_cmd =
      app.add_subcommand("retarget", "Fit joint angles and scale to a clip");
  std::string ret_model, ret_clip, ret_out = ".";
  RetargetOptions ret_options;
  double ret_fps = 60.0;
  ret_cmd->add_option("--model", ret_model, "Limb model JSON")->required();
  ret_cmd->add_option("--clip", ret_clip, "Marker clip (.csv or .json)")->required();
  ret_cmd->add_option("--out", ret_out, "Output directory");
  ret_cmd->add_option("--tolerance", ret_options.tolerance,
                      "Stop when the scale moves less than this");
  ret_cmd->add_option("--max-outer", ret_options.max_outer,
                      "Outer iteration cap");
  ret_cmd->add_option("--damping", ret_options.ik.damping, "IK damping lambda");
  ret_cmd->add_option("--ik-iterations", ret_options.ik.max_iterations,
                      "Per-frame IK iteration cap");
  ret_cmd->add_flag("--parallel", ret_options.parallel,
                    "Solve frames concurrently, warm-started from the "
                    "previous outer pass");
  ret_cmd->add_option("--threads", ret_options.threads,
                      "Worker cap (0: TENDON_FORGE_THREADS or hardware)");
  ret_cmd->add_flag("--forward-scale", ret_options.forward_scale,
                    "Forward-only scale fit instead of the bidirectional one");
  ret_cmd->add_option("--fps", ret_fps, "Frame rate for CSV clips");
  ret_cmd->callback(
      [&] { run_retarget(ret_model, ret_clip, ret_out, ret_options, ret_fps); });

  // track
  auto* track_cmd =
      app.add_subcommand("track", "Track a marker reference with iLQG");
  std::string track_problem, track_out = ".", track_mode;
  int track_threads = 0, track_receding = 0, track_max_iter = 0, track_horizon = 0;
  double track_dt = 0.0;
  track_cmd->add_option("--problem", track_problem, "Problem JSON")->required();
  track_cmd->add_option("--out", track_out, "Output directory");
  track_cmd->add_option("--mode", track_mode,
                        "Activation dynamics: smoothed|switched");
  track_cmd->add_option("--threads", track_threads,
                        "Worker cap (0: TENDON_FORGE_THREADS or hardware)");
  track_cmd->add_option("--receding", track_receding,
                        "Receding-horizon mode: execute N steps per solve");
  track_cmd->add_option("--max-iterations", track_max_iter,
                        "Solver iteration cap override");
  track_cmd->add_option("--horizon", track_horizon,
                        "Horizon override (truncates the reference)");
  track_cmd->add_option("--dt", track_dt, "Timestep override");
  track_cmd->callback([&] {
    run_track(track_problem, track_out, track_mode, track_threads, track_receding,
              track_max_iter, track_horizon, track_dt);
  });

  // metrics
  auto* met_cmd = app.add_subcommand(
      "metrics", "Per-step mean marker error between two marker CSVs");
  std::string met_a, met_b, met_out = "metrics.csv";
  met_cmd->add_option("actual", met_a, "Simulated marker CSV")->required();
  met_cmd->add_option("expected", met_b, "Reference marker CSV")->required();
  met_cmd->add_option("--out", met_out, "Output CSV path");
  met_cmd->callback([&] { run_metrics(met_a, met_b, met_out); });

  // demo
  auto* demo_cmd = app.add_subcommand(
      "demo", "Write the bundled fixtures and run the whole pipeline");
  std::string demo_out = "demo-out";
  int demo_horizon = 300, demo_frames = 60, demo_threads = 0;
  double demo_dt = 1e-3;
  demo_cmd->add_option("--out", demo_out, "Output directory");
  demo_cmd->add_option("--horizon", demo_horizon, "Tracking horizon");
  demo_cmd->add_option("--dt", demo_dt, "Tracking timestep");
  demo_cmd->add_option("--frames", demo_frames, "Clip frame count");
  demo_cmd->add_option("--threads", demo_threads,
                       "Worker cap (0: TENDON_FORGE_THREADS or hardware)");
  demo_cmd->callback(
      [&] { run_demo(demo_out, demo_horizon, demo_dt, demo_frames, demo_threads); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
