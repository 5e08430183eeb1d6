#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>
#include <tendonforge/demo.hpp>
#include <tendonforge/retarget.hpp>
#include <tendonforge/types.hpp>

using namespace tendonforge;

namespace {

LimbModel two_link_arm(double lower = -3.15, double upper = 3.15) {
  LimbModel m;
  m.base_angle = 0.0;
  m.gravity = 0.0;
  for (int i = 0; i < 2; ++i) {
    LinkParams link;
    link.length = 1.0;
    link.mass = 1.0;
    link.com = 0.5;
    link.inertia = 0.1;
    link.lower = lower;
    link.upper = upper;
    m.links.push_back(link);
  }
  m.markers.push_back({1, {1.0, 0.0}, "tip"});
  finalize_model(m);
  return m;
}

Vec3 lift(const Vec2& p) { return {p.x(), p.y(), 0.0}; }

MocapClip clip_from_poses(const LimbModel& model,
                          const std::vector<Eigen::VectorXd>& poses,
                          double scale, double fps = 60.0) {
  MocapClip clip;
  clip.fps = fps;
  for (const auto& q : poses) {
    LimbState s = rest_state(model);
    s.q = q;
    auto pos = marker_positions(model, s);
    std::map<std::string, Vec3> frame;
    for (int i = 0; i < model.n_markers(); ++i)
      frame[model.markers[i].name] = lift(pos[i]) * scale;
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

double tip_error(const LimbModel& model, const Eigen::VectorXd& q,
                 const Vec3& target) {
  LimbState s = rest_state(model);
  s.q = q;
  return (lift(marker_positions(model, s)[0]) - target).norm();
}

}  // namespace

TEST_CASE("clip validation") {
  MocapClip empty;
  CHECK_THROWS_AS(validate(empty), InputError);

  MocapClip clip;
  clip.frames.push_back({{"tip", Vec3(1, 0, 0)}});
  validate(clip);

  MocapClip bad_fps = clip;
  bad_fps.fps = 0.0;
  CHECK_THROWS_AS(validate(bad_fps), InputError);

  MocapClip bad_pos = clip;
  bad_pos.frames[0]["tip"].z() = std::nan("");
  CHECK_THROWS_AS(validate(bad_pos), InputError);
}

TEST_CASE("ik reaches a reachable two-link target") {
  LimbModel m = two_link_arm();
  Eigen::VectorXd q0(2);
  q0 << 0.3, -0.2;
  IkResult r = ik_solve(m, {{"tip", Vec3(1.0, 1.0, 0.0)}}, q0);

  CHECK(r.error_norm < 1e-6);
  CHECK(tip_error(m, r.q, Vec3(1, 1, 0)) < 1e-6);
  // The elbow bends one way or the other; both solutions have |q1| = pi/2.
  CHECK(std::abs(r.q[1]) == doctest::Approx(M_PI / 2.0).epsilon(1e-5));
}

TEST_CASE("ik converges to the boundary for an unreachable target") {
  LimbModel m = two_link_arm();
  Eigen::VectorXd q0(2);
  q0 << 0.2, 0.3;
  // A radially unreachable target sits along the Jacobian's weak direction;
  // heavy damping keeps the steps from slingshotting past full extension.
  IkOptions opts;
  opts.damping = 1.0;
  opts.max_iterations = 2000;
  IkResult r = ik_solve(m, {{"tip", Vec3(3.0, 0.0, 0.0)}}, q0, opts);

  // Fully extended arm pointing along +x, one unit short of the target.
  CHECK(r.error_norm == doctest::Approx(1.0).epsilon(1e-6));
  LimbState s = rest_state(m);
  s.q = r.q;
  Vec2 tip = marker_positions(m, s)[0];
  CHECK(tip.x() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(tip.y()) < 1e-6);
}

TEST_CASE("ik returns a satisfied pose unchanged") {
  LimbModel m = two_link_arm();
  Eigen::VectorXd q0(2);
  q0 << 0.4, -0.8;
  LimbState s = rest_state(m);
  s.q = q0;
  Vec3 target = lift(marker_positions(m, s)[0]);

  IkResult r = ik_solve(m, {{"tip", target}}, q0);
  CHECK((r.q - q0).norm() == 0.0);
  CHECK(r.iterations <= 1);
}

TEST_CASE("heavily damped ik descends monotonically") {
  LimbModel m = two_link_arm();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> angle(-1.2, 1.2);

  IkOptions step_opts;
  step_opts.damping = 10.0;
  step_opts.max_iterations = 1;

  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd q(2);
    q << angle(rng), angle(rng);
    Vec3 target(1.2 * std::cos(angle(rng)), 1.2 * std::sin(angle(rng)), 0.0);

    double prev = tip_error(m, q, target);
    for (int it = 0; it < 20; ++it) {
      q = ik_solve(m, {{"tip", target}}, q, step_opts).q;
      double err = tip_error(m, q, target);
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("ik clamps to joint limits") {
  LimbModel m = two_link_arm(-0.3, 0.3);
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(2);
  IkResult r = ik_solve(m, {{"tip", Vec3(-1.0, 1.5, 0.0)}}, q0);
  for (int i = 0; i < 2; ++i) {
    CHECK(r.q[i] >= -0.3);
    CHECK(r.q[i] <= 0.3);
  }
}

TEST_CASE("scale fit recovers synthetic scales") {
  LimbModel model = demo_limb();
  std::mt19937 rng(25);
  std::uniform_real_distribution<double> angle(-0.9, 0.9);

  std::vector<Eigen::VectorXd> poses;
  for (int f = 0; f < 8; ++f) {
    Eigen::VectorXd q(3);
    q << angle(rng), angle(rng), angle(rng);
    poses.push_back(q);
  }

  SUBCASE("generated scales round-trip") {
    for (double truth : {1.0, 1.25, 0.5}) {
      MocapClip clip = clip_from_poses(model, poses, truth);
      CHECK(std::abs(fit_scale(model, poses, clip) - truth) < 1e-9);
      CHECK(std::abs(fit_scale(model, poses, clip, true) - truth) < 1e-9);
    }
  }

  SUBCASE("fit is equivariant under rescaling the capture") {
    MocapClip clip = clip_from_poses(model, poses, 1.1);
    double base = fit_scale(model, poses, clip);
    MocapClip bigger = clip;
    for (auto& frame : bigger.frames)
      for (auto& [name, pos] : frame) pos *= 1.7;
    CHECK(std::abs(fit_scale(model, poses, bigger) - 1.7 * base) < 1e-9);
  }

  SUBCASE("a spreadless cloud is degenerate") {
    MocapClip flat;
    flat.frames.push_back({});
    for (const auto& marker : model.markers)
      flat.frames[0][marker.name] = Vec3(0.2, 0.2, 0.0);
    CHECK_THROWS_WITH_AS(fit_scale(model, {poses[0]}, flat),
                         doctest::Contains("degenerate clip"), InputError);
  }
}

TEST_CASE("retarget recovers the generating poses and scale") {
  LimbModel model = demo_limb();
  std::vector<Eigen::VectorXd> truth;
  MocapClip clip = demo_clip(model, 40, 60.0, 1.25, &truth);

  RetargetResult result = retarget(model, clip);

  REQUIRE(result.poses.size() == truth.size());
  CHECK(std::abs(result.scale - 1.25) < 1e-4);

  double sq = 0.0;
  int count = 0;
  for (size_t f = 0; f < truth.size(); ++f)
    for (int j = 0; j < truth[f].size(); ++j) {
      double d = result.poses[f][j] - truth[f][j];
      sq += d * d;
      ++count;
    }
  CHECK(std::sqrt(sq / count) < 1e-3);

  // Hard limit check on every returned frame.
  for (const auto& q : result.poses)
    for (int j = 0; j < model.n_links(); ++j) {
      CHECK(q[j] >= model.links[j].lower);
      CHECK(q[j] <= model.links[j].upper);
    }

  // Accepted outer updates never increase the capture-space residual.
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : result.log) {
    if (!rec.accepted) continue;
    CHECK(rec.total_residual <= prev + 1e-12);
    prev = rec.total_residual;
  }

  // Parallel frame solving lands on the same answer.
  RetargetOptions par;
  par.parallel = true;
  par.threads = 4;
  RetargetResult presult = retarget(model, clip, par);
  CHECK(std::abs(presult.scale - 1.25) < 1e-4);
  double dq = 0.0;
  for (size_t f = 0; f < truth.size(); ++f)
    dq = std::max(dq, (presult.poses[f] - result.poses[f]).cwiseAbs().maxCoeff());
  CHECK(dq < 1e-3);
}

TEST_CASE("identity clip converges immediately") {
  LimbModel model = demo_limb();
  MocapClip clip = clip_from_poses(model, {model.rest_pose}, 1.0);
  RetargetResult result = retarget(model, clip);
  CHECK(result.outer_iterations == 1);
  CHECK(result.scale == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.residuals[0] < 1e-6);
  CHECK((result.poses[0] - model.rest_pose).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("marker noise shows up as bounded residual") {
  LimbModel model = demo_limb();
  const double noise = 0.005;
  double total_sq = 0.0;
  int count = 0;
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937 rng(100 + seed);
    std::normal_distribution<double> jitter(0.0, noise);
    std::vector<Eigen::VectorXd> truth;
    MocapClip clip = demo_clip(model, 5, 60.0, 1.0, &truth);
    for (auto& frame : clip.frames)
      for (auto& [name, pos] : frame) {
        pos.x() += jitter(rng);
        pos.y() += jitter(rng);
      }
    RetargetResult result = retarget(model, clip);
    for (double r : result.residuals) {
      total_sq += r * r;
      ++count;
    }
  }
  double rms = std::sqrt(total_sq / count);
  CHECK(rms > 0.0);
  CHECK(rms < 2.0 * noise);
}

TEST_CASE("ground clearance lifts penetrating frames to the floor") {
  LimbModel model = demo_limb();

  SUBCASE("constructed penetration is raised exactly to zero") {
    RetargetResult result;
    result.poses.push_back(Eigen::VectorXd::Zero(3));
    ground_clearance(result, model);
    LimbState s = rest_state(model);
    s.q = result.poses[0];
    auto pos = marker_positions(model, s);
    double lowest = 1e9;
    for (const auto& p : pos) lowest = std::min(lowest, p.y());
    REQUIRE(lowest < 0.0);  // the hanging demo leg dips below the base
    CHECK(result.root_offsets[0] == doctest::Approx(-lowest).epsilon(1e-12));
    CHECK(lowest + result.root_offsets[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("airborne frames are left alone") {
    LimbModel arm = two_link_arm();
    RetargetResult result;
    Eigen::VectorXd up(2);
    up << M_PI / 2.0, 0.0;  // arm pointing straight up, tip at (0, 2)
    result.poses.push_back(up);
    ground_clearance(result, arm);
    CHECK(result.root_offsets[0] == 0.0);
  }

  SUBCASE("random frames end non-penetrating") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> angle(-2.0, 2.0);
    RetargetResult result;
    for (int f = 0; f < 30; ++f) {
      Eigen::VectorXd q(3);
      q << angle(rng), angle(rng), angle(rng);
      result.poses.push_back(q);
    }
    ground_clearance(result, model);
    REQUIRE(result.root_offsets.size() == result.poses.size());
    for (size_t f = 0; f < result.poses.size(); ++f) {
      CHECK(result.root_offsets[f] >= 0.0);
      LimbState s = rest_state(model);
      s.q = result.poses[f];
      for (const auto& p : marker_positions(model, s))
        CHECK(p.y() + result.root_offsets[f] >= -1e-12);
    }
  }
}

TEST_CASE("clip files round-trip in both formats") {
  LimbModel model = demo_limb();
  MocapClip clip = demo_clip(model, 6, 120.0, 1.1);
  clip.frames[2].erase("toe");  // dropped marker survives the round trip

  auto dir = std::filesystem::temp_directory_path() / "tf_retarget_tests";
  std::filesystem::create_directories(dir);

  auto csv_path = (dir / "clip.csv").string();
  write_clip_csv(csv_path, clip);
  MocapClip from_csv = load_clip(csv_path);
  REQUIRE(from_csv.n_frames() == clip.n_frames());
  CHECK(from_csv.frames[2].count("toe") == 0);
  for (int f = 0; f < clip.n_frames(); ++f)
    for (const auto& [name, pos] : clip.frames[f])
      CHECK((from_csv.frames[f].at(name) - pos).norm() < 1e-12);

  auto json_path = (dir / "clip.json").string();
  write_clip_json(json_path, clip);
  MocapClip from_json = load_clip(json_path);
  CHECK(from_json.fps == clip.fps);
  for (int f = 0; f < clip.n_frames(); ++f)
    for (const auto& [name, pos] : clip.frames[f])
      CHECK((from_json.frames[f].at(name) - pos).norm() < 1e-12);

  CHECK_THROWS_AS(load_clip((dir / "clip.xml").string()), InputError);
}

TEST_CASE("retarget outputs are written for downstream tools") {
  LimbModel model = demo_limb();
  MocapClip clip = demo_clip(model, 5, 60.0, 1.25);
  RetargetResult result = retarget(model, clip);

  auto dir = std::filesystem::temp_directory_path() / "tf_retarget_tests";
  std::filesystem::create_directories(dir);
  auto csv = (dir / "poses.csv").string();
  auto meta = (dir / "meta.json").string();
  write_result_csv(csv, result);
  write_result_metadata(meta, result);

  std::ifstream meta_in(meta);
  nlohmann::json j = nlohmann::json::parse(meta_in);
  CHECK(std::abs(j.at("scale").get<double>() - result.scale) < 1e-12);
  CHECK(j.at("residuals").size() == result.residuals.size());

  std::ifstream csv_in(csv);
  std::string header;
  std::getline(csv_in, header);
  CHECK(header.substr(0, 5) == "frame");
  int rows = 0;
  for (std::string line; std::getline(csv_in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == clip.n_frames());
}
