#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cotraj/io.hpp"
#include "cotraj/solver.hpp"

namespace {

using namespace cotraj;

constexpr int kExitSuccess = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitInputError = 3;
constexpr int kExitIterationLimit = 4;

struct Inputs {
  RobotModel robot;
  TaskSpec task;
  std::optional<MotorLibrary> motors;
};

Inputs load_inputs(const std::string& robot_path, const std::string& task_path,
                   const std::string& motors_path) {
  Inputs in{load_robot_spec(robot_path), TaskSpec{}, std::nullopt};
  in.task = load_task_spec(task_path, in.robot);
  if (!motors_path.empty()) in.motors = load_motor_library(motors_path);
  return in;
}

int status_exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
    case SolveStatus::Feasible: return kExitSuccess;
    case SolveStatus::Infeasible: return kExitInfeasible;
    case SolveStatus::IterationLimit: return kExitIterationLimit;
  }
  return kExitInputError;
}

int cmd_optimize(const std::string& robot_path, const std::string& task_path,
                 const std::string& motors_path, int knots, double duration,
                 double alpha, double beta, uint64_t seed, bool seed_set,
                 int restarts, const std::string& out_path,
                 const std::string& csv_path, const std::string& log_path) {
  Inputs in = load_inputs(robot_path, task_path, motors_path);
  BuildOptions bopts;
  bopts.knots = knots;
  bopts.duration = duration;
  bopts.alpha = alpha;
  bopts.beta = beta;
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, bopts);

  SolverOptions sopts;
  sopts.seed = seed_set ? seed : in.task.seed;
  if (restarts >= 0) sopts.restart_budget = restarts;
  std::ofstream log_file;
  if (log_path == "-") {
    sopts.log = &std::cerr;
  } else if (!log_path.empty()) {
    log_file.open(log_path);
    sopts.log = &log_file;
  }

  CompiledNlp compiled(problem);
  std::vector<double> x0 = initialize_guess(problem, sopts.seed);
  SolveResult res = co_optimize(problem, compiled, x0, sopts);

  ResultDocument doc = make_result_document(
      in.robot, problem, res, in.motors ? &*in.motors : nullptr, sopts.seed);
  std::string json = export_result_json(doc);
  if (!out_path.empty())
    write_file(out_path, json);
  else
    std::cout << json;
  if (!csv_path.empty()) write_file(csv_path, export_result_csv(doc));

  std::ostream& summary = out_path.empty() ? std::cerr : std::cout;
  summary << doc.status << " objective=" << res.objective;
  if (!doc.selected_motor.empty()) summary << " motor=" << doc.selected_motor;
  summary << " max_violation=" << res.max_violation << "\n";
  return status_exit_code(res.status);
}

int cmd_validate(const std::string& result_path, const std::string& robot_path,
                 const std::string& task_path, const std::string& motors_path,
                 double tol) {
  Inputs in = load_inputs(robot_path, task_path, motors_path);
  ResultDocument doc = parse_result(read_file(result_path));
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, {});
  const DecisionLayout& lay = problem.layout;

  // Audit against the tightest relaxation no looser than the requested
  // tolerance; complementarity slacks are not part of the exported
  // trajectory.
  double slack = std::min(tol, 1e-6);
  problem.set_slack_limit(slack);
  std::vector<double> x = reconstruct_decision_vector(problem, doc, slack);

  auto violations = evaluate_violations(problem, x);
  bool pass = true;
  for (const auto& [family, v] : violations) {
    bool ok = v <= tol;
    pass = pass && ok;
    std::cout << family << " " << v << " " << (ok ? "pass" : "fail") << "\n";
  }
  std::cout << (pass ? "pass" : "fail") << "\n";
  return pass ? kExitSuccess : kExitInfeasible;
}

int cmd_info(const std::string& robot_path, const std::string& task_path,
             const std::string& motors_path) {
  Inputs in = load_inputs(robot_path, task_path, motors_path);
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, {});
  const DecisionLayout& lay = problem.layout;

  std::cout << "robot " << in.robot.name << "\n";
  std::cout << "n " << lay.n << "\nm " << lay.m << "\nl " << lay.l << "\np "
            << lay.p << "\nK " << lay.K << "\n";
  std::cout << "variables " << lay.total() << "\n";

  std::map<std::string, int> tally;
  std::size_t nnz = 0;
  int rows = 0;
  for (const auto& b : problem.blocks) {
    tally[family_name(b.family)] += static_cast<int>(b.exprs.size());
    rows += static_cast<int>(b.exprs.size());
    for (const auto& e : b.exprs) nnz += variables_of({&e, 1}).size();
  }
  for (const auto& [family, count] : tally)
    std::cout << "constraints." << family << " " << count << "\n";
  std::cout << "constraints.total " << rows << "\n";
  std::cout << "jacobian_nnz " << nnz << "\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-optimization of robot design parameters, motor selection, "
               "and contact-implicit trajectories"};
  app.require_subcommand(1);

  std::string robot_path, task_path, motors_path, result_path;
  std::string out_path, csv_path, log_path;
  int knots = 0;
  double duration = 0, alpha = -1, beta = -1, tol = 1e-6;
  uint64_t seed = 0;
  int restarts = -1;

  auto* opt = app.add_subcommand("optimize", "solve a co-design problem");
  opt->add_option("robot", robot_path, "robot spec (JSON)")->required();
  opt->add_option("task", task_path, "task spec (JSON)")->required();
  opt->add_option("motors", motors_path, "motor library (JSON)");
  opt->add_option("--knots", knots, "override knot count");
  opt->add_option("--time", duration, "override max duration (s)");
  opt->add_option("--alpha", alpha, "actuation objective weight");
  opt->add_option("--beta", beta, "regularization weight");
  auto* seed_opt = opt->add_option("--seed", seed, "RNG seed");
  opt->add_option("--restarts", restarts, "restart budget");
  opt->add_option("--out", out_path, "result JSON path");
  opt->add_option("--csv", csv_path, "trajectory CSV path");
  opt->add_option("--log", log_path, "iteration log path ('-' for stderr)");

  auto* val = app.add_subcommand("validate", "audit a result's constraints");
  val->add_option("result", result_path, "result JSON")->required();
  val->add_option("robot", robot_path, "robot spec (JSON)")->required();
  val->add_option("task", task_path, "task spec (JSON)")->required();
  val->add_option("motors", motors_path, "motor library (JSON)");
  val->add_option("--tol", tol, "violation tolerance");

  auto* info = app.add_subcommand("info", "print problem statistics");
  info->add_option("robot", robot_path, "robot spec (JSON)")->required();
  info->add_option("task", task_path, "task spec (JSON)")->required();
  info->add_option("motors", motors_path, "motor library (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(opt))
      return cmd_optimize(robot_path, task_path, motors_path, knots, duration,
                          alpha, beta, seed, seed_opt->count() > 0, restarts,
                          out_path, csv_path, log_path);
    if (app.got_subcommand(val))
      return cmd_validate(result_path, robot_path, task_path, motors_path, tol);
    return cmd_info(robot_path, task_path, motors_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}
