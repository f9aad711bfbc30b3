#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "cotraj/io.hpp"

namespace py = pybind11;
using namespace cotraj;

namespace {

struct Inputs {
  RobotModel robot;
  TaskSpec task;
  std::optional<MotorLibrary> motors;
};

Inputs parse_inputs(const std::string& robot_json, const std::string& task_json,
                    const std::string& motors_json) {
  Inputs in{parse_robot_spec(robot_json), TaskSpec{}, std::nullopt};
  in.task = parse_task_spec(task_json, in.robot);
  if (!motors_json.empty()) in.motors = parse_motor_library(motors_json);
  return in;
}

std::string optimize(const std::string& robot_json,
                     const std::string& task_json,
                     const std::string& motors_json, int knots,
                     double duration, double alpha, double beta,
                     std::optional<uint64_t> seed, int restarts) {
  Inputs in = parse_inputs(robot_json, task_json, motors_json);
  BuildOptions bopts;
  bopts.knots = knots;
  bopts.duration = duration;
  bopts.alpha = alpha;
  bopts.beta = beta;
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, bopts);

  SolverOptions sopts;
  sopts.seed = seed ? *seed : in.task.seed;
  if (restarts >= 0) sopts.restart_budget = restarts;

  CompiledNlp compiled(problem);
  std::vector<double> x0 = initialize_guess(problem, sopts.seed);
  SolveResult res;
  {
    py::gil_scoped_release release;
    res = co_optimize(problem, compiled, x0, sopts);
  }
  ResultDocument doc = make_result_document(
      in.robot, problem, res, in.motors ? &*in.motors : nullptr, sopts.seed);
  return export_result_json(doc);
}

py::dict validate(const std::string& result_json,
                  const std::string& robot_json, const std::string& task_json,
                  const std::string& motors_json, double tol) {
  Inputs in = parse_inputs(robot_json, task_json, motors_json);
  ResultDocument doc = parse_result(result_json);
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, {});

  double slack = std::min(tol, 1e-6);
  problem.set_slack_limit(slack);
  std::vector<double> x = reconstruct_decision_vector(problem, doc, slack);
  auto violations = evaluate_violations(problem, x);

  bool pass = true;
  py::dict per_family;
  for (const auto& [family, v] : violations) {
    pass = pass && v <= tol;
    per_family[py::str(family)] = v;
  }
  py::dict out;
  out["violations"] = per_family;
  out["pass"] = pass;
  return out;
}

py::dict problem_info(const std::string& robot_json,
                      const std::string& task_json,
                      const std::string& motors_json) {
  Inputs in = parse_inputs(robot_json, task_json, motors_json);
  NlpProblem problem =
      build_nlp(in.robot, in.task, in.motors ? &*in.motors : nullptr, {});
  const DecisionLayout& lay = problem.layout;

  py::dict families;
  int rows = 0;
  std::size_t nnz = 0;
  std::map<std::string, int> tally;
  for (const auto& b : problem.blocks) {
    tally[family_name(b.family)] += static_cast<int>(b.exprs.size());
    rows += static_cast<int>(b.exprs.size());
    for (const auto& e : b.exprs) nnz += variables_of({&e, 1}).size();
  }
  for (const auto& [family, count] : tally)
    families[py::str(family)] = count;

  py::dict out;
  out["robot"] = in.robot.name;
  out["n"] = lay.n;
  out["m"] = lay.m;
  out["l"] = lay.l;
  out["p"] = lay.p;
  out["K"] = lay.K;
  out["variables"] = lay.total();
  out["constraints"] = families;
  out["constraints_total"] = rows;
  out["jacobian_nnz"] = nnz;
  return out;
}

std::string result_csv(const std::string& result_json) {
  return export_result_csv(parse_result(result_json));
}

py::dict select_motor(const std::string& motors_json, double xi) {
  MotorLibrary lib = parse_motor_library(motors_json);
  const MotorSpec& m = lib.select_motor(xi);
  py::dict out;
  out["name"] = m.name;
  out["mass"] = m.mass;
  out["max_torque"] = m.max_torque;
  out["voltage"] = m.voltage;
  out["top_speed"] = m.top_speed;
  out["extent"] = py::make_tuple(m.extent_x, m.extent_y, m.extent_z);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "co-optimization of robot design parameters, motor selection, "
            "and contact-implicit trajectories";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<InfeasibleTorque>(m, "InfeasibleTorque",
                                           PyExc_ValueError);

  m.def("optimize", &optimize, py::arg("robot_json"), py::arg("task_json"),
        py::arg("motors_json") = "", py::arg("knots") = 0,
        py::arg("duration") = 0.0, py::arg("alpha") = -1.0,
        py::arg("beta") = -1.0, py::arg("seed") = py::none(),
        py::arg("restarts") = -1,
        "Runs the full pipeline and returns the result document as a JSON "
        "string.");
  m.def("validate", &validate, py::arg("result_json"), py::arg("robot_json"),
        py::arg("task_json"), py::arg("motors_json") = "",
        py::arg("tol") = 1e-6,
        "Audits an exported result against the problem's constraints.");
  m.def("problem_info", &problem_info, py::arg("robot_json"),
        py::arg("task_json"), py::arg("motors_json") = "",
        "Dimensions and constraint counts of the transcribed problem.");
  m.def("result_csv", &result_csv, py::arg("result_json"),
        "Renders a result document's trajectory as CSV.");
  m.def("select_motor", &select_motor, py::arg("motors_json"), py::arg("xi"),
        "Smallest catalog motor whose torque rating covers xi.");
}
