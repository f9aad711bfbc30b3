#pragma once

#include <map>
#include <string>
#include <vector>

#include "cotraj/motors.hpp"
#include "cotraj/robot.hpp"
#include "cotraj/solver.hpp"
#include "cotraj/task.hpp"

namespace cotraj {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RobotModel parse_robot_spec(const std::string& text);
TaskSpec parse_task_spec(const std::string& text, const RobotModel& robot);
MotorLibrary parse_motor_library(const std::string& text);

RobotModel load_robot_spec(const std::string& path);
TaskSpec load_task_spec(const std::string& path, const RobotModel& robot);
MotorLibrary load_motor_library(const std::string& path);

struct ResultDocument {
  std::string status;
  std::vector<std::string> param_names;
  std::vector<std::string> param_units;
  std::vector<double> rho;
  std::string selected_motor;
  double xi = 0;
  double g_act = 0, g_reg = 0, objective = 0;
  std::vector<double> times;                // K entries
  std::vector<std::vector<double>> q, qd, u, lambda;  // per knot
  std::map<std::string, double> residuals;  // per-family max violation
  uint64_t seed = 0;
  int iterations = 0;
  double wall_time = 0;
};

std::string export_result_json(const ResultDocument& result);
std::string export_result_csv(const ResultDocument& result);
ResultDocument parse_result(const std::string& text);

/// Assembles the exportable document from a finished solve.
ResultDocument make_result_document(const RobotModel& robot,
                                    const NlpProblem& problem,
                                    const SolveResult& result,
                                    const MotorLibrary* motors, uint64_t seed);

/// Rebuilds the flat decision vector from an exported document for auditing.
/// Complementarity slacks are not exported, so they are all set to `slack`;
/// knot spacings come from the time stamps. Throws SchemaError when the
/// document's dimensions do not match the problem.
std::vector<double> reconstruct_decision_vector(const NlpProblem& problem,
                                                const ResultDocument& doc,
                                                double slack);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace cotraj
