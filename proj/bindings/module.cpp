#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tendonforge/demo.hpp"
#include "tendonforge/limb.hpp"
#include "tendonforge/loa.hpp"
#include "tendonforge/muscle.hpp"
#include "tendonforge/retarget.hpp"
#include "tendonforge/tracking.hpp"

namespace py = pybind11;
using namespace tendonforge;

PYBIND11_MODULE(_core, m) {
  m.doc() = "tendonforge core: line-of-action extraction, muscle dynamics, "
            "tracking, and retargeting";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<MuscleParams>(m, "MuscleParams")
      .def(py::init<>())
      .def_readwrite("name", &MuscleParams::name)
      .def_readwrite("f0", &MuscleParams::f0)
      .def_readwrite("l_opt", &MuscleParams::l_opt)
      .def_readwrite("v_max", &MuscleParams::v_max)
      .def_readwrite("tau_a", &MuscleParams::tau_a)
      .def_readwrite("tau_d", &MuscleParams::tau_d)
      .def_readwrite("tau_smooth", &MuscleParams::tau_smooth);

  m.def("flv",
        [](const MuscleParams& p, double L, double V, double a) {
          return flv(p, L, V, a);
        },
        py::arg("params"), py::arg("length"), py::arg("velocity"),
        py::arg("activation"));
  m.def("tau_smoothed",
        [](const MuscleParams& p, double u, double a) {
          return tau_smoothed(u, a, p);
        },
        py::arg("params"), py::arg("excitation"), py::arg("activation"));
  m.def("tau_switched",
        [](const MuscleParams& p, double u, double a) {
          return tau_switched(u, a, p);
        },
        py::arg("params"), py::arg("excitation"), py::arg("activation"));
  m.def("step_activation",
        [](const MuscleParams& p, double u, double a, double dt,
           const std::string& mode) {
          return step_activation(u, a, dt, p, mode_from_name(mode));
        },
        py::arg("params"), py::arg("excitation"), py::arg("activation"),
        py::arg("dt"), py::arg("mode") = "smoothed");

  py::class_<LimbModel>(m, "LimbModel")
      .def_property_readonly("name",
                             [](const LimbModel& model) { return model.name; })
      .def_property_readonly("n_links", &LimbModel::n_links)
      .def_property_readonly("n_muscles", &LimbModel::n_muscles)
      .def_property_readonly("n_markers", &LimbModel::n_markers)
      .def_property_readonly("rest_pose",
                             [](const LimbModel& model) { return model.rest_pose; })
      .def_property_readonly("muscle_names",
                             [](const LimbModel& model) {
                               std::vector<std::string> names;
                               for (const auto& muscle : model.muscles)
                                 names.push_back(muscle.params.name);
                               return names;
                             })
      .def_property_readonly("marker_names", [](const LimbModel& model) {
        std::vector<std::string> names;
        for (const auto& marker : model.markers) names.push_back(marker.name);
        return names;
      });

  m.def("demo_limb", &demo_limb);
  m.def("load_model", &load_model, py::arg("path"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));

  py::class_<LimbState>(m, "LimbState")
      .def(py::init<>())
      .def_readwrite("q", &LimbState::q)
      .def_readwrite("qdot", &LimbState::qdot)
      .def_readwrite("a", &LimbState::a);

  m.def("rest_state", &rest_state, py::arg("model"));
  m.def("step",
        [](const LimbModel& model, const LimbState& state,
           const Eigen::VectorXd& u, double dt, const std::string& mode) {
          return step(model, state, u, dt, mode_from_name(mode));
        },
        py::arg("model"), py::arg("state"), py::arg("excitations"), py::arg("dt"),
        py::arg("mode") = "smoothed");
  m.def("marker_positions",
        [](const LimbModel& model, const LimbState& state) {
          return marker_positions(model, state);
        },
        py::arg("model"), py::arg("state"));
  m.def("mass_matrix", &mass_matrix, py::arg("model"), py::arg("q"));
  m.def("total_energy", &total_energy, py::arg("model"), py::arg("state"));

  m.def("extract_loa_json",
        [](const std::string& muscle_path,
           const std::vector<std::pair<std::string, std::string>>& bones,
           const std::string& axis, double max_dist, double min_dist_new_bone,
           double n_slices_per_meter) {
          std::vector<TriMesh> bone_meshes;
          for (const auto& [name, path] : bones) {
            TriMesh mesh = load_mesh(path);
            mesh.name = name;
            bone_meshes.push_back(std::move(mesh));
          }
          BoneIndex skeleton(bone_meshes);
          TriMesh muscle = load_mesh(muscle_path);
          Vec3 ax = Vec3::UnitX();
          if (axis == "auto")
            ax = principal_axis(muscle);
          else if (axis == "x")
            ax = Vec3::UnitX();
          else if (axis == "y")
            ax = Vec3::UnitY();
          else if (axis == "z")
            ax = Vec3::UnitZ();
          else
            throw InputError("axis must be auto, x, y, or z");
          LoaConfig config;
          config.max_dist = max_dist;
          config.min_dist_new_bone = min_dist_new_bone;
          config.n_slices_per_meter = n_slices_per_meter;
          return tendon_to_json(extract_loa(skeleton, muscle, ax, config)).dump();
        },
        py::arg("muscle_mesh"), py::arg("bones"), py::arg("axis") = "auto",
        py::arg("max_dist") = 0.1, py::arg("min_dist_new_bone") = 0.05,
        py::arg("n_slices_per_meter") = 100.0);

  py::class_<MocapClip>(m, "MocapClip")
      .def(py::init<>())
      .def_readwrite("fps", &MocapClip::fps)
      .def_readwrite("frames", &MocapClip::frames)
      .def_property_readonly("n_frames", &MocapClip::n_frames);

  m.def("load_clip", &load_clip, py::arg("path"));
  m.def("demo_clip",
        [](const LimbModel& model, int frames, double fps, double scale) {
          return demo_clip(model, frames, fps, scale, nullptr);
        },
        py::arg("model"), py::arg("frames") = 60, py::arg("fps") = 60.0,
        py::arg("scale") = 1.25);

  py::class_<RetargetResult>(m, "RetargetResult")
      .def_readonly("poses", &RetargetResult::poses)
      .def_readonly("scale", &RetargetResult::scale)
      .def_readonly("residuals", &RetargetResult::residuals)
      .def_readonly("root_offsets", &RetargetResult::root_offsets)
      .def_readonly("outer_iterations", &RetargetResult::outer_iterations);

  m.def("retarget",
        [](const LimbModel& model, const MocapClip& clip, double tolerance,
           int max_outer, bool parallel, int threads, bool forward_scale) {
          RetargetOptions options;
          options.tolerance = tolerance;
          options.max_outer = max_outer;
          options.parallel = parallel;
          options.threads = threads;
          options.forward_scale = forward_scale;
          return retarget(model, clip, options);
        },
        py::arg("model"), py::arg("clip"), py::arg("tolerance") = 1e-6,
        py::arg("max_outer") = 20, py::arg("parallel") = false,
        py::arg("threads") = 1, py::arg("forward_scale") = false);

  py::class_<TrackingProblem>(m, "TrackingProblem")
      .def_readwrite("horizon", &TrackingProblem::horizon)
      .def_readwrite("dt", &TrackingProblem::dt)
      .def_readwrite("threads", &TrackingProblem::threads)
      .def_property(
          "mode",
          [](const TrackingProblem& p) { return std::string(mode_name(p.mode)); },
          [](TrackingProblem& p, const std::string& name) {
            p.mode = mode_from_name(name);
          })
      .def_property_readonly(
          "model", [](const TrackingProblem& p) { return p.model; });

  m.def("load_problem", &load_problem, py::arg("path"));
  m.def("demo_problem",
        [](int horizon, double dt, const std::string& mode) {
          return demo_problem(horizon, dt, mode_from_name(mode));
        },
        py::arg("horizon") = 300, py::arg("dt") = 1e-3,
        py::arg("mode") = "smoothed");

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("states", &Trajectory::states)
      .def_readonly("controls", &Trajectory::controls)
      .def_readonly("cost", &Trajectory::cost)
      .def_readonly("term_costs", &Trajectory::term_costs)
      .def_readonly("iterations", &Trajectory::iterations)
      .def_readonly("status", &Trajectory::status);

  m.def("solve_tracking",
        [](const TrackingProblem& problem, int max_iterations) {
          IlqgOptions options;
          if (max_iterations > 0) options.max_iterations = max_iterations;
          return solve_tracking(problem, {}, options);
        },
        py::arg("problem"), py::arg("max_iterations") = 0);
  m.def("tracking_error",
        [](const TrackingProblem& problem, const Trajectory& trajectory) {
          return kinematic_error(
              trajectory_markers(problem.model, trajectory.states),
              problem.reference.positions);
        },
        py::arg("problem"), py::arg("trajectory"));

  py::class_<DemoFixtures>(m, "DemoFixtures")
      .def_readonly("model", &DemoFixtures::model)
      .def_readonly("reference", &DemoFixtures::reference)
      .def_readonly("problem", &DemoFixtures::problem)
      .def_readonly("clip_csv", &DemoFixtures::clip_csv)
      .def_readonly("clip_json", &DemoFixtures::clip_json)
      .def_readonly("muscle_mesh", &DemoFixtures::muscle_mesh)
      .def_readonly("bone_meshes", &DemoFixtures::bone_meshes);

  m.def("write_demo_fixtures", &write_demo_fixtures, py::arg("dir"),
        py::arg("horizon") = 300, py::arg("dt") = 1e-3, py::arg("frames") = 60);
}
