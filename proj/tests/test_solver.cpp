#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "cotraj/solver.hpp"
#include "test_models.hpp"

using namespace cotraj;
using namespace cotraj::testing;

namespace {

/// Bare problem over nvars free scalars (no trajectory structure).
NlpProblem bare_problem(int nvars) {
  NlpProblem p;
  p.layout.K = 1;
  p.layout.n = 0;
  p.layout.m = nvars - 1;
  p.layout.l = 0;
  p.layout.p = 0;
  REQUIRE(p.layout.total() == nvars);
  p.lower.assign(nvars, -kInfinity);
  p.upper.assign(nvars, kInfinity);
  p.objective_spec.mode = ObjectiveSpec::Mode::Time;  // no torque pinning
  return p;
}

SolverOptions quiet_opts() {
  SolverOptions o;
  o.restart_budget = 0;
  return o;
}

void add_block(NlpProblem& p, ConstraintFamily fam, Expr e, double lo,
               double hi) {
  ConstraintBlock b;
  b.family = fam;
  b.label = "row";
  b.exprs = {std::move(e)};
  b.lower = {lo};
  b.upper = {hi};
  p.blocks.push_back(std::move(b));
}

}  // namespace

TEST_CASE("unconstrained quadratic lands on the vertex") {
  NlpProblem p = bare_problem(1);
  Expr x = Expr::variable(0);
  p.objective = (x - 5.0) * (x - 5.0);
  CompiledNlp c(p);
  SolveResult r = solve_nlp(p, c, {0.0}, quiet_opts(), SolvePhase::Cost);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("bound clipping is respected") {
  NlpProblem p = bare_problem(1);
  p.lower[0] = 0.0;
  p.upper[0] = 2.0;
  Expr x = Expr::variable(0);
  p.objective = (x - 5.0) * (x - 5.0);
  CompiledNlp c(p);
  SolveResult r = solve_nlp(p, c, {1.0}, quiet_opts(), SolvePhase::Cost);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("equality-constrained quadratic recovers the projection") {
  // min x^2 + y^2 s.t. x + y = 1 has the unique solution (1/2, 1/2).
  NlpProblem p = bare_problem(2);
  Expr x = Expr::variable(0), y = Expr::variable(1);
  p.objective = x * x + y * y;
  add_block(p, ConstraintFamily::Task, x + y, 1.0, 1.0);
  CompiledNlp c(p);

  SolverOptions opts = quiet_opts();
  SolveResult feas =
      solve_nlp(p, c, {0.3, -0.7}, opts, SolvePhase::Feasibility);
  REQUIRE(feas.max_violation <= opts.constraint_tol);
  SolveResult r = solve_nlp(p, c, feas.x, opts, SolvePhase::Cost);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-4));

  SUBCASE("the KKT residuals certify the answer") {
    KktReport kkt = kkt_residual(p, c, r.x, r.multipliers);
    CHECK(kkt.stationarity <= 1e-3);
    CHECK(kkt.primal_feasibility <= 1e-6);
    CHECK(kkt.dual_feasibility <= 1e-9);
    CHECK(kkt.complementarity <= 1e-3);
  }
}

TEST_CASE("relaxed complementarity pushes to a vertex of xy = 0") {
  // x, y >= 0, x + y = 1, xy <= s with the slack s driven down the
  // schedule: the only solutions within the final relaxation hug an axis.
  NlpProblem p = bare_problem(3);
  p.lower[0] = p.lower[1] = 0.0;
  p.lower[2] = 0.0;
  p.upper[2] = 1e-2;
  p.slack_indices = {2};
  p.u_limits = {1.0, 1.0};
  Expr x = Expr::variable(0), y = Expr::variable(1), s = Expr::variable(2);
  p.objective = Expr(0.0);
  add_block(p, ConstraintFamily::Task, x + y, 1.0, 1.0);
  add_block(p, ConstraintFamily::Contact, x * y - s, -kInfinity, 0.0);
  CompiledNlp c(p);

  SolverOptions opts = quiet_opts();
  SolveResult r = co_optimize(p, c, {0.8, 0.2, 1e-2}, opts);
  REQUIRE(r.status != SolveStatus::Infeasible);
  CHECK(r.x[0] + r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x[0] * r.x[1] <= 1e-6 + 1e-9);
  CHECK(std::min(r.x[0], r.x[1]) <= 2e-6);
}

TEST_CASE("random strictly convex quadratics match the closed form") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    int n = 2 + static_cast<int>(rng() % 5);  // 2..6
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = uniform(rng, -1.0, 1.0);
    Eigen::MatrixXd Q = A.transpose() * A +
                        0.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd lin(n);
    for (int i = 0; i < n; ++i) lin(i) = uniform(rng, -2.0, 2.0);
    Eigen::VectorXd xstar = Q.ldlt().solve(-lin);

    NlpProblem p = bare_problem(n);
    Expr obj(0.0);
    for (int i = 0; i < n; ++i) {
      obj += Expr(lin(i)) * Expr::variable(i);
      for (int j = 0; j < n; ++j)
        obj += Expr(0.5 * Q(i, j)) * Expr::variable(i) * Expr::variable(j);
    }
    p.objective = obj;
    CompiledNlp c(p);
    SolverOptions opts = quiet_opts();
    opts.optimality_tol = 1e-7;  // eigenvalues >= 1/2 bound the x error
    SolveResult r = solve_nlp(p, c, std::vector<double>(n, 0.0), opts,
                              SolvePhase::Cost);
    // Ill-conditioned draws may settle slightly above the stationarity
    // goal; the solution accuracy check below is the real oracle.
    REQUIRE((r.status == SolveStatus::Optimal ||
             r.status == SolveStatus::Feasible));
    for (int i = 0; i < n; ++i)
      CHECK(r.x[i] == doctest::Approx(xstar(i)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("box-constrained quadratics satisfy the projected optimality test") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    CAPTURE(trial);
    int n = 3;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = uniform(rng, -1.0, 1.0);
    Eigen::MatrixXd Q = A.transpose() * A +
                        Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd lin(n);
    for (int i = 0; i < n; ++i) lin(i) = uniform(rng, -4.0, 4.0);

    NlpProblem p = bare_problem(n);
    for (int i = 0; i < n; ++i) {
      p.lower[i] = -0.5;
      p.upper[i] = 0.5;
    }
    Expr obj(0.0);
    for (int i = 0; i < n; ++i) {
      obj += Expr(lin(i)) * Expr::variable(i);
      for (int j = 0; j < n; ++j)
        obj += Expr(0.5 * Q(i, j)) * Expr::variable(i) * Expr::variable(j);
    }
    p.objective = obj;
    CompiledNlp c(p);
    SolveResult r =
        solve_nlp(p, c, std::vector<double>(n, 0.0), quiet_opts(),
                  SolvePhase::Cost);
    REQUIRE(r.status == SolveStatus::Optimal);

    Eigen::Map<Eigen::VectorXd> xs(r.x.data(), n);
    Eigen::VectorXd g = Q * xs + lin;
    for (int i = 0; i < n; ++i) {
      CAPTURE(i);
      if (r.x[i] <= -0.5 + 1e-8)
        CHECK(g(i) >= -1e-4);
      else if (r.x[i] >= 0.5 - 1e-8)
        CHECK(g(i) <= 1e-4);
      else
        CHECK(std::abs(g(i)) <= 1e-4);
    }
  }
}

TEST_CASE("accepted inner steps never increase the merit") {
  NlpProblem p = bare_problem(2);
  Expr x = Expr::variable(0), y = Expr::variable(1);
  p.objective = (x - 1.0) * (x - 1.0) + 10.0 * (y - x * x) * (y - x * x);
  add_block(p, ConstraintFamily::Task, x * x + y * y, -kInfinity, 2.0);
  CompiledNlp c(p);

  std::ostringstream log;
  SolverOptions opts = quiet_opts();
  opts.max_outer_iterations = 1;  // a single merit function end to end
  opts.log = &log;
  solve_nlp(p, c, {-1.2, 1.0}, opts, SolvePhase::Cost);

  std::istringstream in(log.str());
  std::string tag;
  int iter;
  double phi, viol, obj, alpha;
  double prev = std::numeric_limits<double>::infinity();
  int lines = 0;
  while (in >> tag >> iter >> phi >> viol >> obj >> alpha) {
    CHECK(phi <= prev + 1e-9 * (1.0 + std::abs(prev)));
    prev = phi;
    ++lines;
  }
  CHECK(lines >= 5);
}

TEST_CASE("identical seeds give bitwise identical solves") {
  NlpProblem p = bare_problem(3);
  p.lower[0] = p.lower[1] = 0.0;
  p.lower[2] = 0.0;
  p.upper[2] = 1e-2;
  p.slack_indices = {2};
  p.u_limits = {1.0, 1.0};
  Expr x = Expr::variable(0), y = Expr::variable(1), s = Expr::variable(2);
  p.objective = (x - 0.2) * (x - 0.2);
  add_block(p, ConstraintFamily::Task, x + y, 1.0, 1.0);
  add_block(p, ConstraintFamily::Contact, x * y - s, -kInfinity, 0.0);
  CompiledNlp c(p);

  SolverOptions opts = quiet_opts();
  opts.seed = 42;
  opts.restart_budget = 2;
  SolveResult a = co_optimize(p, c, {0.8, 0.2, 1e-2}, opts);
  SolveResult b = co_optimize(p, c, {0.8, 0.2, 1e-2}, opts);
  CHECK(a.status == b.status);
  CHECK(a.x == b.x);  // bitwise
  CHECK(a.objective == b.objective);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("violation report is per family") {
  NlpProblem p = bare_problem(2);
  Expr x = Expr::variable(0), y = Expr::variable(1);
  p.objective = Expr(0.0);
  add_block(p, ConstraintFamily::Task, x, 1.0, 1.0);
  add_block(p, ConstraintFamily::Dynamics, y, -kInfinity, 0.0);
  auto v = evaluate_violations(p, std::vector<double>{3.0, 0.5});
  CHECK(v.at("task") == doctest::Approx(2.0));
  CHECK(v.at("dynamics") == doctest::Approx(0.5));
  CHECK(v.at("contact") == 0.0);
}
