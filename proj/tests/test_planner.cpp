#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <tendonforge/demo.hpp>
#include <tendonforge/ilqg.hpp>
#include <tendonforge/norms.hpp>
#include <tendonforge/tracking.hpp>
#include <tendonforge/types.hpp>

using namespace tendonforge;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd r(1);
  r << v;
  return r;
}

// Double integrator with quadratic costs: the classic case where iLQG must
// reproduce the exact discrete LQR solution.
class DoubleIntegratorLq : public OcpProblem {
 public:
  DoubleIntegratorLq(int horizon, double dt) : n_(horizon), dt_(dt) {
    A_.resize(2, 2);
    A_ << 1.0, dt, 0.0, 1.0;
    B_.resize(2, 1);
    B_ << 0.0, dt;
    Q_ = Eigen::Vector2d(1.0, 0.1).asDiagonal();
    Qf_ = Eigen::Vector2d(10.0, 1.0).asDiagonal();
    R_ = Eigen::MatrixXd::Constant(1, 1, 0.1);
    x0_ = Eigen::Vector2d(1.0, 0.0);
  }

  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }
  int horizon() const override { return n_; }
  Eigen::VectorXd initial_state() const override { return x0_; }
  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           int) const override {
    return A_ * x + B_ * u;
  }
  DynamicsJacobians dynamics_jacobians(const Eigen::VectorXd&,
                                       const Eigen::VectorXd&,
                                       int) const override {
    return {A_, B_};
  }
  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    int) const override {
    return 0.5 * x.dot(Q_ * x) + 0.5 * u.dot(R_ * u);
  }
  double terminal_cost(const Eigen::VectorXd& x) const override {
    return 0.5 * x.dot(Qf_ * x);
  }
  CostExpansion cost_expansion(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, int) const override {
    CostExpansion e;
    e.l = 0.5 * x.dot(Q_ * x) + 0.5 * u.dot(R_ * u);
    e.lx = Q_ * x;
    e.lu = R_ * u;
    e.lxx = Q_;
    e.luu = R_;
    e.lux = Eigen::MatrixXd::Zero(1, 2);
    return e;
  }
  CostExpansion terminal_expansion(const Eigen::VectorXd& x) const override {
    CostExpansion e;
    e.l = terminal_cost(x);
    e.lx = Qf_ * x;
    e.lxx = Qf_;
    return e;
  }

  // Backward Riccati recursion and the induced closed-loop rollout.
  std::vector<Eigen::VectorXd> lqr_controls() const {
    std::vector<Eigen::MatrixXd> K(n_);
    Eigen::MatrixXd P = Qf_;
    for (int k = n_ - 1; k >= 0; --k) {
      Eigen::MatrixXd H = R_ + B_.transpose() * P * B_;
      K[k] = H.ldlt().solve(B_.transpose() * P * A_);
      Eigen::MatrixXd Acl = A_ - B_ * K[k];
      P = Q_ + K[k].transpose() * R_ * K[k] + Acl.transpose() * P * Acl;
    }
    std::vector<Eigen::VectorXd> u(n_);
    Eigen::VectorXd x = x0_;
    for (int k = 0; k < n_; ++k) {
      u[k] = -K[k] * x;
      x = A_ * x + B_ * u[k];
    }
    return u;
  }

 private:
  int n_;
  double dt_;
  Eigen::MatrixXd A_, B_, Q_, Qf_, R_;
  Eigen::VectorXd x0_;
};

class FreeProblem : public OcpProblem {
 public:
  explicit FreeProblem(int horizon) : n_(horizon) {}
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  int horizon() const override { return n_; }
  Eigen::VectorXd initial_state() const override { return vec1(1.0); }
  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           int) const override {
    return x + u;
  }
  double stage_cost(const Eigen::VectorXd&, const Eigen::VectorXd&,
                    int) const override {
    return 0.0;
  }
  double terminal_cost(const Eigen::VectorXd&) const override { return 0.0; }
  CostExpansion cost_expansion(const Eigen::VectorXd&, const Eigen::VectorXd&,
                               int) const override {
    CostExpansion e;
    e.lx = Eigen::VectorXd::Zero(1);
    e.lu = Eigen::VectorXd::Zero(1);
    e.lxx = Eigen::MatrixXd::Zero(1, 1);
    e.luu = Eigen::MatrixXd::Zero(1, 1);
    e.lux = Eigen::MatrixXd::Zero(1, 1);
    return e;
  }
  CostExpansion terminal_expansion(const Eigen::VectorXd&) const override {
    CostExpansion e;
    e.lx = Eigen::VectorXd::Zero(1);
    e.lxx = Eigen::MatrixXd::Zero(1, 1);
    return e;
  }

 private:
  int n_;
};

}  // namespace

TEST_CASE("norm anchors") {
  CHECK(norm_quadratic(Eigen::VectorXd::Zero(3)) == 0.0);
  CHECK(norm_quadratic(vec1(1.0)) == doctest::Approx(0.5).epsilon(1e-15));
  Eigen::VectorXd r34(2);
  r34 << 3.0, 4.0;
  CHECK(norm_quadratic(r34) == doctest::Approx(12.5).epsilon(1e-15));

  CHECK(norm_cosh(Eigen::VectorXd::Zero(2), 0.3) == 0.0);
  double cosh_anchor = 0.09 * (std::cosh(1.0) - 1.0);
  CHECK(std::abs(norm_cosh(vec1(0.3), 0.3) - cosh_anchor) < 1e-15);
  CHECK(std::abs(norm_cosh(vec1(0.3), 0.3) - 0.048877257133371933) < 1e-12);

  CHECK(norm_smooth_abs(Eigen::VectorXd::Zero(2), 0.1) == 0.0);
  CHECK(std::abs(norm_smooth_abs(vec1(1.0), 0.1) -
                 (std::sqrt(1.01) - 0.1)) < 1e-15);
  CHECK(std::abs(norm_smooth_abs(vec1(1.0), 0.1) - 0.904987562112089) < 1e-12);
  CHECK(norm_smooth_abs(vec1(-1.0), 0.1) == norm_smooth_abs(vec1(1.0), 0.1));

  // Small residuals: cosh degenerates to the quadratic norm.
  double tiny = 1e-4;
  CHECK(std::abs(norm_cosh(vec1(tiny), 0.3) / norm_quadratic(vec1(tiny)) - 1.0) <
        1e-6);
}

TEST_CASE("norm names round-trip") {
  for (const char* name : {"quadratic", "cosh", "smooth_abs"}) {
    NormKind kind = norm_from_name(name);
    CHECK(norm_name(kind) == std::string(name));
  }
  CHECK_THROWS_AS(norm_from_name("huber"), InputError);
}

TEST_CASE("norms are even, zero at zero, increasing, with exact derivatives") {
  for (NormKind kind :
       {NormKind::quadratic, NormKind::cosh_norm, NormKind::smooth_abs}) {
    double p = 0.3;
    CHECK(norm_eval(kind, 0.0, p).value == 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 20; ++i) {
      double r = i * 0.1;
      NormEval e = norm_eval(kind, r, p);
      CHECK(e.value > prev);
      prev = e.value;
      CHECK(norm_eval(kind, -r, p).value == doctest::Approx(e.value));

      double h = 1e-6;
      double fd1 = (norm_eval(kind, r + h, p).value -
                    norm_eval(kind, r - h, p).value) /
                   (2.0 * h);
      double fd2 = (norm_eval(kind, r + h, p).d1 -
                    norm_eval(kind, r - h, p).d1) /
                   (2.0 * h);
      CHECK(std::abs(e.d1 - fd1) / std::max(1.0, std::abs(e.d1)) < 1e-6);
      CHECK(std::abs(e.d2 - fd2) / std::max(1.0, std::abs(e.d2)) < 1e-6);
    }
  }
  CHECK_THROWS_AS(norm_eval(NormKind::cosh_norm, 0.1, 0.0), InputError);
  CHECK_THROWS_AS(norm_eval(NormKind::smooth_abs, 0.1, -0.5), InputError);
}

TEST_CASE("default cost terms match the documented weights") {
  auto terms = default_cost_terms();
  REQUIRE(terms.size() == 4);
  CHECK(terms[0].residual == ResidualKind::joint_velocity);
  CHECK(terms[0].norm == NormKind::quadratic);
  CHECK(terms[0].weight == 0.01);
  CHECK(terms[1].residual == ResidualKind::control);
  CHECK(terms[1].norm == NormKind::cosh_norm);
  CHECK(terms[1].p == 0.3);
  CHECK(terms[1].weight == 0.1);
  CHECK(terms[2].residual == ResidualKind::marker_pos);
  CHECK(terms[2].norm == NormKind::smooth_abs);
  CHECK(terms[2].p == 0.1);
  CHECK(terms[2].weight == 1.0);
  CHECK(terms[3].residual == ResidualKind::marker_vel);
  CHECK(terms[3].p == 0.3);
  CHECK(terms[3].weight == 0.1);

  for (const char* name :
       {"joint_velocity", "control", "marker_pos", "marker_vel"}) {
    CHECK(residual_name(residual_from_name(name)) == std::string(name));
  }
  CHECK_THROWS_AS(residual_from_name("torque"), InputError);
}

TEST_CASE("stage cost anchors") {
  SUBCASE("on-reference rest state costs nothing") {
    TrackingProblem p = demo_problem(3);
    LimbState rest = rest_state(p.model);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(p.model.n_muscles());
    // The reference starts from the same rest rollout, so step 0 matches.
    StageCost c = stage_cost(p, rest, u, 0);
    CHECK(c.total == doctest::Approx(0.0).epsilon(1e-12));
    REQUIRE(c.per_term.size() == 4);
  }

  SUBCASE("single marker offset through the smooth absolute norm") {
    LimbModel m;
    m.gravity = 0.0;
    LinkParams link;
    link.length = 1.0;
    link.mass = 1.0;
    link.com = 0.5;
    link.inertia = 0.1;
    m.links.push_back(link);
    m.markers.push_back({0, {1.0, 0.0}, "tip"});
    finalize_model(m);

    LimbState s = rest_state(m);
    Vec2 pos = marker_positions(m, s)[0];

    TrackingProblem p;
    p.model = m;
    p.horizon = 1;
    p.terms = {{ResidualKind::marker_pos, NormKind::smooth_abs, 0.1, 1.0}};
    p.reference.positions = {{pos - Vec2(0.3, 0.4)}, {pos - Vec2(0.3, 0.4)}};
    p.reference.velocities = {{Vec2::Zero()}, {Vec2::Zero()}};

    StageCost c = stage_cost(p, s, Eigen::VectorXd::Zero(0), 0);
    double expected = (std::sqrt(0.09 + 0.01) - 0.1) + (std::sqrt(0.16 + 0.01) - 0.1);
    CHECK(std::abs(c.total - expected) < 1e-15);
    CHECK(std::abs(c.total - 0.528538328578604) < 1e-12);
    CHECK(c.total == doctest::Approx(0.528539).epsilon(1e-5));
  }

  SUBCASE("doubling every weight doubles the cost") {
    TrackingProblem p = demo_problem(5);
    LimbState s = rest_state(p.model);
    s.q.setConstant(0.2);
    s.qdot.setConstant(0.5);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(p.model.n_muscles(), 0.4);
    double base = stage_cost(p, s, u, 2).total;
    CHECK(base > 0.0);
    TrackingProblem doubled = p;
    for (auto& term : doubled.terms) term.weight *= 2.0;
    CHECK(stage_cost(doubled, s, u, 2).total ==
          doctest::Approx(2.0 * base).epsilon(1e-12));
  }

  SUBCASE("terminal step drops the control term") {
    TrackingProblem p = demo_problem(4);
    LimbState s = rest_state(p.model);
    s.qdot.setConstant(0.3);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(p.model.n_muscles(), 0.9);
    StageCost mid = stage_cost(p, s, u, 1);
    StageCost last = stage_cost(p, s, u, p.horizon);
    CHECK(mid.per_term[1] > 0.0);
    CHECK(last.per_term[1] == 0.0);
  }
}

TEST_CASE("ilqg reproduces the discrete lqr solution") {
  DoubleIntegratorLq problem(50, 0.05);
  auto oracle = problem.lqr_controls();

  std::vector<Eigen::VectorXd> u0(50, Eigen::VectorXd::Zero(1));
  IlqgResult result = ilqg_solve(problem, u0);

  CHECK(result.status == "converged");
  REQUIRE(result.controls.size() == oracle.size());
  double worst = 0.0;
  for (size_t k = 0; k < oracle.size(); ++k)
    worst = std::max(worst, (result.controls[k] - oracle[k]).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-6);

  // Accepted iterations decrease the cost strictly.
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : result.log) {
    if (!rec.accepted) continue;
    CHECK(rec.cost < prev);
    prev = rec.cost;
  }
}

TEST_CASE("zero cost returns the initial controls untouched") {
  FreeProblem problem(10);
  std::vector<Eigen::VectorXd> u0(10, vec1(0.37));
  IlqgResult result = ilqg_solve(problem, u0);
  CHECK(result.cost == 0.0);
  for (const auto& u : result.controls) CHECK(u[0] == 0.37);
}

TEST_CASE("non-finite initialization is rejected") {
  // NaN controls fail the input check before any rollout.
  DoubleIntegratorLq problem(10, 0.05);
  std::vector<Eigen::VectorXd> u0(10, vec1(std::nan("")));
  CHECK_THROWS_AS(ilqg_solve(problem, u0), InputError);

  // Finite controls whose rollout overflows fail as a bad initialization.
  class Explosive : public FreeProblem {
   public:
    using FreeProblem::FreeProblem;
    Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd&,
                             int) const override {
      return x * 1e60;
    }
  };
  Explosive blowup(10);
  std::vector<Eigen::VectorXd> zeros(10, vec1(0.0));
  CHECK_THROWS_WITH_AS(ilqg_solve(blowup, zeros),
                       doctest::Contains("bad initialization"), SolverError);
}

TEST_CASE("tracking validation rejects inconsistent problems") {
  TrackingProblem p = demo_problem(10);
  validate(p);

  TrackingProblem short_ref = p;
  short_ref.reference.positions.pop_back();
  CHECK_THROWS_AS(validate(short_ref), InputError);

  TrackingProblem bad_dt = p;
  bad_dt.dt = 0.0;
  CHECK_THROWS_AS(validate(bad_dt), InputError);

  TrackingProblem bad_p = p;
  bad_p.terms[1].p = 0.0;
  CHECK_THROWS_AS(validate(bad_p), InputError);

  TrackingProblem bad_w = p;
  bad_w.terms[0].weight = -1.0;
  CHECK_THROWS_AS(validate(bad_w), InputError);
}

TEST_CASE("tracking solve is deterministic and re-simulable") {
  TrackingProblem p = demo_problem(40);
  IlqgOptions options;
  options.max_iterations = 8;

  Trajectory a = solve_tracking(p, {}, options);
  Trajectory b = solve_tracking(p, {}, options);
  CHECK(a.cost == b.cost);
  REQUIRE(a.controls.size() == b.controls.size());
  for (size_t k = 0; k < a.controls.size(); ++k)
    CHECK((a.controls[k] - b.controls[k]).cwiseAbs().maxCoeff() == 0.0);

  // Same answer when derivative evaluation is parallelized.
  TrackingProblem threaded = p;
  threaded.threads = 4;
  Trajectory c = solve_tracking(threaded, {}, options);
  CHECK(c.cost == a.cost);
  for (size_t k = 0; k < a.controls.size(); ++k)
    CHECK((c.controls[k] - a.controls[k]).cwiseAbs().maxCoeff() == 0.0);

  // Replaying the returned controls reproduces the returned states exactly.
  LimbState s = a.states[0];
  for (size_t k = 0; k < a.controls.size(); ++k) {
    s = step(p.model, s, a.controls[k], p.dt, p.mode);
    CHECK((pack_state(s) - pack_state(a.states[k + 1])).cwiseAbs().maxCoeff() ==
          0.0);
  }

  // The iteration log's accepted entries are strictly decreasing.
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : a.log) {
    if (!rec.accepted) continue;
    CHECK(rec.cost < prev);
    prev = rec.cost;
  }
}

TEST_CASE("receding horizon covers the full reference") {
  TrackingProblem p = demo_problem(60);
  IlqgOptions options;
  options.max_iterations = 4;
  Trajectory t = solve_receding(p, 20, options);
  REQUIRE(static_cast<int>(t.states.size()) == p.horizon + 1);
  REQUIRE(static_cast<int>(t.controls.size()) == p.horizon);

  LimbState s = t.states[0];
  for (size_t k = 0; k < t.controls.size(); ++k) {
    s = step(p.model, s, t.controls[k], p.dt, p.mode);
    CHECK((pack_state(s) - pack_state(t.states[k + 1])).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("kinematic error averages marker distances per step") {
  std::vector<std::vector<Vec2>> ref = {{{0, 0}, {1, 1}}, {{2, 0}, {0, 2}}};

  auto zero = kinematic_error(ref, ref);
  REQUIRE(zero.size() == 2);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  auto sim = ref;
  sim[1][0] += Vec2(3.0, 4.0);
  auto err = kinematic_error(sim, ref);
  CHECK(err[0] == 0.0);
  CHECK(err[1] == doctest::Approx(2.5).epsilon(1e-15));

  // Independent arithmetic on random data.
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::vector<std::vector<Vec2>> a(5), b(5);
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 3; ++j) {
      a[t].push_back({coord(rng), coord(rng)});
      b[t].push_back({coord(rng), coord(rng)});
    }
  auto got = kinematic_error(a, b);
  for (int t = 0; t < 5; ++t) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      double dx = a[t][j].x() - b[t][j].x(), dy = a[t][j].y() - b[t][j].y();
      sum += std::hypot(dx, dy);
    }
    CHECK(std::abs(got[t] - sum / 3.0) < 1e-12);
  }

  std::vector<std::vector<Vec2>> mismatched = {{{0, 0}}};
  CHECK_THROWS_AS(kinematic_error(mismatched, ref), InputError);
}

TEST_CASE("reference csv round-trips") {
  LimbModel model = demo_limb();
  MarkerReference ref = demo_reference(model, 20, 1e-3);

  auto dir = std::filesystem::temp_directory_path() / "tf_planner_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "reference.csv").string();
  write_reference(path, model, ref, 1e-3);
  MarkerReference back = read_reference(path, model);

  REQUIRE(back.positions.size() == ref.positions.size());
  for (size_t k = 0; k < ref.positions.size(); ++k)
    for (size_t j = 0; j < ref.positions[k].size(); ++j) {
      CHECK((back.positions[k][j] - ref.positions[k][j]).norm() < 1e-12);
      CHECK((back.velocities[k][j] - ref.velocities[k][j]).norm() < 1e-12);
    }

  MarkerSeries series = read_marker_series(path);
  CHECK(series.names == std::vector<std::string>{"knee", "ankle", "toe", "thigh"});
  CHECK(series.positions.size() == ref.positions.size());
  CHECK(series.times.size() == ref.positions.size());
  CHECK(series.times[1] == doctest::Approx(1e-3));
}
