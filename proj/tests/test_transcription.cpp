#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cotraj/io.hpp"
#include "cotraj/transcription.hpp"
#include "test_models.hpp"

using namespace cotraj;
using namespace cotraj::testing;

namespace {

std::string models_path(const std::string& name) {
  return std::string(COTRAJ_MODELS_DIR) + "/" + name;
}

TaskSpec simple_task(int knots, double duration, std::vector<double> q0,
                     std::vector<double> q1) {
  TaskSpec t;
  t.knots = knots;
  t.duration_max = duration;
  t.keyframes.push_back({0, std::move(q0)});
  t.keyframes.push_back({knots - 1, std::move(q1)});
  return t;
}

const ConstraintBlock& find_block(const NlpProblem& nlp,
                                  const std::string& label) {
  for (const auto& b : nlp.blocks)
    if (b.label == label) return b;
  REQUIRE_MESSAGE(false, "missing block " << label);
  static ConstraintBlock dummy;
  return dummy;
}

}  // namespace

TEST_CASE("decision indices tile the vector exactly once") {
  DecisionLayout lay;
  lay.K = 3;
  lay.n = 2;
  lay.m = 1;
  lay.l = 2;
  lay.p = 2;
  std::set<int> seen;
  for (int k = 0; k < lay.K; ++k) {
    for (int i = 0; i < lay.n; ++i) {
      seen.insert(lay.q_index(k, i));
      seen.insert(lay.qd_index(k, i));
    }
    for (int j = 0; j < lay.m; ++j) seen.insert(lay.u_index(k, j));
    for (int c = 0; c < lay.l; ++c)
      for (int comp = 0; comp < 6; ++comp)
        seen.insert(lay.lambda_index(k, c, comp));
  }
  for (int k = 0; k + 1 < lay.K; ++k) {
    for (int c = 0; c < lay.l; ++c)
      for (int s = 0; s < 5; ++s) seen.insert(lay.slack_index(k, c, s));
    seen.insert(lay.dt_index(k));
  }
  for (int i = 0; i < lay.p; ++i) seen.insert(lay.rho_index(i));
  seen.insert(lay.xi_index());

  CHECK(static_cast<int>(seen.size()) == lay.total());
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == lay.total() - 1);
}

TEST_CASE("bundled problems have the expected decision dimensions") {
  struct Row {
    const char* robot;
    const char* task;
    int total;
  };
  MotorLibrary motors = load_motor_library(models_path("dynamixel.json"));
  for (const Row& row : {Row{"quadcopter.json", "quadcopter_task.json", 274},
                         Row{"hexapod.json", "hexapod_task.json", 1528},
                         Row{"biped.json", "biped_task.json", 750},
                         Row{"quadruped.json", "quadruped_task.json", 1284}}) {
    CAPTURE(row.robot);
    RobotModel r = load_robot_spec(models_path(row.robot));
    TaskSpec t = load_task_spec(models_path(row.task), r);
    NlpProblem nlp = build_nlp(r, t, &motors);
    CHECK(nlp.layout.total() == row.total);
  }
}

TEST_CASE("point mass defect rows match the hand-written Euler step") {
  const double m = 2.3, g = 9.81;
  RobotModel robot = point_mass_prismatic(m);
  TaskSpec task = simple_task(3, 1.0, {0.0}, {0.5});
  NlpProblem nlp = build_nlp(robot, task, nullptr);
  const DecisionLayout& lay = nlp.layout;
  REQUIRE(lay.n == 1);
  REQUIRE(lay.l == 0);

  std::vector<double> x(lay.total(), 0.0);
  x[lay.q_index(0, 0)] = 0.1;
  x[lay.q_index(1, 0)] = 0.3;
  x[lay.qd_index(0, 0)] = 0.7;
  x[lay.qd_index(1, 0)] = -0.2;
  x[lay.u_index(0, 0)] = 4.0;
  x[lay.dt_index(0)] = 0.4;

  const ConstraintBlock& b = find_block(nlp, "defect[0]");
  REQUIRE(b.exprs.size() == 2);
  auto v = evaluate(b.exprs, x);
  // q' - q - qd dt and m (qd' - qd) - (u - m g) dt.
  CHECK(v[0] == doctest::Approx(0.3 - 0.1 - 0.7 * 0.4).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(m * (-0.2 - 0.7) - (4.0 - m * g) * 0.4)
                    .epsilon(1e-12));
  CHECK(b.lower[0] == 0.0);
  CHECK(b.upper[0] == 0.0);

  SUBCASE("a consistent Euler step zeroes the defect") {
    double dt = x[lay.dt_index(0)];
    double qd = x[lay.qd_index(0, 0)];
    double u = x[lay.u_index(0, 0)];
    x[lay.q_index(1, 0)] = x[lay.q_index(0, 0)] + qd * dt;
    x[lay.qd_index(1, 0)] = qd + (u / m - g) * dt;
    auto z = evaluate(b.exprs, x);
    CHECK(std::abs(z[0]) <= 1e-14);
    CHECK(std::abs(z[1]) <= 1e-12);
  }
}

TEST_CASE("pendulum defect rows carry the parametric length") {
  const double m = 1.4, g = 9.81, len = 0.8;
  RobotModel robot = pendulum(m, len, /*len_is_param=*/true);
  TaskSpec task = simple_task(3, 0.9, {0.2}, {1.0});
  NlpProblem nlp = build_nlp(robot, task, nullptr);
  const DecisionLayout& lay = nlp.layout;
  REQUIRE(lay.p == 1);

  std::vector<double> x(lay.total(), 0.0);
  const double q = 0.35, qd = -1.1, qdn = 0.6, u = 2.5, dt = 0.25;
  x[lay.q_index(0, 0)] = q;
  x[lay.qd_index(0, 0)] = qd;
  x[lay.qd_index(1, 0)] = qdn;
  x[lay.u_index(0, 0)] = u;
  x[lay.dt_index(0)] = dt;
  x[lay.rho_index(0)] = len;

  const ConstraintBlock& b = find_block(nlp, "defect[0]");
  auto v = evaluate(b.exprs, x);
  // m len^2 qdd + m g len sin(q) = u, scaled through H and dt.
  double expect = m * len * len * (qdn - qd) -
                  (u - m * g * len * std::sin(q)) * dt;
  CHECK(v[1] == doctest::Approx(expect).epsilon(1e-12));

  SUBCASE("the defect responds to the length variable") {
    x[lay.rho_index(0)] = 2.0 * len;
    auto w = evaluate(b.exprs, x);
    CHECK(w[1] != doctest::Approx(v[1]));
  }
}

TEST_CASE("implicit stepping evaluates dynamics at the far knot") {
  const double m = 2.3, g = 9.81;
  RobotModel robot = point_mass_prismatic(m);
  TaskSpec task = simple_task(3, 1.0, {0.0}, {0.5});
  BuildOptions opts;
  opts.implicit_euler = true;
  NlpProblem nlp = build_nlp(robot, task, nullptr, opts);
  const DecisionLayout& lay = nlp.layout;

  std::vector<double> x(lay.total(), 0.0);
  x[lay.qd_index(0, 0)] = 0.7;
  x[lay.qd_index(1, 0)] = -0.2;
  x[lay.dt_index(0)] = 0.4;
  auto v = evaluate(find_block(nlp, "defect[0]").exprs, x);
  // Position row uses qd at k+1 under the implicit rule.
  CHECK(v[0] == doctest::Approx(0.0 - 0.0 - (-0.2) * 0.4).epsilon(1e-14));
}

TEST_CASE("variable bounds encode limits, windows, and pinned equalities") {
  RobotModel r = load_robot_spec(models_path("quadcopter.json"));
  TaskSpec t = load_task_spec(models_path("quadcopter_task.json"), r);
  NlpProblem nlp = build_nlp(r, t, nullptr);
  const DecisionLayout& lay = nlp.layout;

  SUBCASE("config equalities pin the variable") {
    CHECK(nlp.lower[lay.q_index(0, 0)] == 1.0);
    CHECK(nlp.upper[lay.q_index(0, 0)] == 1.0);
    CHECK(nlp.lower[lay.q_index(0, 1)] == 0.0);
    CHECK(nlp.upper[lay.q_index(0, 1)] == 0.0);
  }
  SUBCASE("the task's dt window scales the nominal spacing") {
    double dt0 = t.duration_max / (t.knots - 1);
    CHECK(nlp.lower[lay.dt_index(0)] ==
          doctest::Approx(t.dt_min_factor * dt0));
    CHECK(nlp.upper[lay.dt_index(0)] ==
          doctest::Approx(t.dt_max_factor * dt0));
  }
  SUBCASE("design parameters inherit their declared ranges") {
    for (int i = 0; i < lay.p; ++i) {
      CHECK(nlp.lower[lay.rho_index(i)] == r.params[i].lower);
      CHECK(nlp.upper[lay.rho_index(i)] == r.params[i].upper);
    }
  }
  SUBCASE("the torque bound variable spans [0, max actuator limit]") {
    CHECK(nlp.lower[lay.xi_index()] == 0.0);
    double lim = 0;
    for (const auto& a : r.actuators) lim = std::max(lim, a.limit);
    CHECK(nlp.upper[lay.xi_index()] == doctest::Approx(lim));
  }
}

TEST_CASE("contact blocks pose six cones and six relaxed products per point") {
  RobotModel r = load_robot_spec(models_path("hopper.json"));
  TaskSpec t = load_task_spec(models_path("hopper_task.json"), r);
  NlpProblem nlp = build_nlp(r, t, nullptr);
  const DecisionLayout& lay = nlp.layout;
  REQUIRE(lay.l == 1);

  for (int k = 0; k < lay.K; ++k) {
    const ConstraintBlock& b =
        find_block(nlp, "contact[" + std::to_string(k) + "]");
    REQUIRE(b.exprs.size() == 12u * lay.l);
    for (int i = 0; i < 6; ++i) {
      CHECK(b.lower[i] == 0.0);
      CHECK(b.upper[i] == kInfinity);
    }
    for (int i = 6; i < 12; ++i) {
      CHECK(b.lower[i] == -kInfinity);
      CHECK(b.upper[i] == 0.0);
    }
  }

  SUBCASE("force components and slacks are sign constrained") {
    for (int comp = 0; comp < 6; ++comp)
      CHECK(nlp.lower[lay.lambda_index(3, 0, comp)] == 0.0);
    for (int idx : nlp.slack_indices) {
      CHECK(nlp.lower[idx] == 0.0);
      CHECK(nlp.upper[idx] == doctest::Approx(nlp.slack_initial));
    }
  }
  SUBCASE("tightening the relaxation only moves the slack caps") {
    auto lower_before = nlp.lower;
    nlp.set_slack_limit(1e-4);
    for (int idx : nlp.slack_indices) CHECK(nlp.upper[idx] == 1e-4);
    CHECK(nlp.lower == lower_before);
  }
}

TEST_CASE("defect rows only touch their own interval plus the design") {
  RobotModel r = load_robot_spec(models_path("hopper.json"));
  TaskSpec t = load_task_spec(models_path("hopper_task.json"), r);
  NlpProblem nlp = build_nlp(r, t, nullptr);
  const DecisionLayout& lay = nlp.layout;
  const int ks = lay.knot_stride();

  for (int k = 0; k + 1 < lay.K; k += 3) {
    const ConstraintBlock& b =
        find_block(nlp, "defect[" + std::to_string(k) + "]");
    auto used = variables_of(b.exprs);
    for (int idx : used) {
      bool in_knots = idx >= ks * k && idx < ks * (k + 2);
      bool is_dt = idx == lay.dt_index(k);
      bool is_design = idx >= lay.rho_index(0) && idx < lay.xi_index();
      CHECK((in_knots || is_dt || is_design));
    }
  }
}

TEST_CASE("initial guesses are deterministic in the seed") {
  RobotModel r = load_robot_spec(models_path("hopper.json"));
  TaskSpec t = load_task_spec(models_path("hopper_task.json"), r);
  NlpProblem nlp = build_nlp(r, t, nullptr);
  const DecisionLayout& lay = nlp.layout;

  auto a = initialize_guess(nlp, 5);
  auto b = initialize_guess(nlp, 5);
  auto c = initialize_guess(nlp, 6);
  CHECK(a == b);
  CHECK(a != c);

  SUBCASE("structure of the guess") {
    for (int k = 0; k < lay.K; ++k)
      for (int i = 0; i < lay.n; ++i) {
        CHECK(a[lay.q_index(k, i)] == nlp.guess_q[k][i]);
        CHECK(a[lay.qd_index(k, i)] == 0.0);
      }
    double dt0 = nlp.duration / (lay.K - 1);
    for (int k = 0; k + 1 < lay.K; ++k)
      CHECK(a[lay.dt_index(k)] == doctest::Approx(dt0));
    for (int i = 0; i < lay.p; ++i)
      CHECK(a[lay.rho_index(i)] == nlp.rho0[i]);
    for (int idx : nlp.slack_indices)
      CHECK(a[idx] == doctest::Approx(nlp.slack_initial));

    double max_u = 0;
    for (int k = 0; k < lay.K; ++k)
      for (int j = 0; j < lay.m; ++j) {
        CHECK(std::abs(a[lay.u_index(k, j)]) <= nlp.u_limits[j]);
        max_u = std::max(max_u, std::abs(a[lay.u_index(k, j)]));
      }
    CHECK(a[lay.xi_index()] == doctest::Approx(max_u));
  }

  SUBCASE("touching contacts start loaded with the robot's weight") {
    // The task pins the initial pose with the foot on the ground.
    double phi0 = evaluate1(nlp.contact_phi[0][0], a);
    REQUIRE(phi0 <= nlp.contact_tol);
    CHECK(a[lay.lambda_index(0, 0, 0)] == doctest::Approx(nlp.total_weight));
    CHECK(nlp.total_weight > 0);
  }
}

TEST_CASE("uniform draws stay inside the half-open range") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    double v = uniform_draw(rng(), -2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
  CHECK(uniform_draw(12345, 0.0, 1.0) == uniform_draw(12345, 0.0, 1.0));
}
