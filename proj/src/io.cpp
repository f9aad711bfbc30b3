#include "cotraj/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cotraj {
namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(what + ": " + e.what());
  }
}

const json& require(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw SchemaError("missing field '" + std::string(key) + "' in " + ctx);
  return *it;
}

double number_at(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number())
    throw SchemaError("field '" + std::string(key) + "' in " + ctx +
                      " must be a number");
  return v.get<double>();
}

std::string string_at(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_string())
    throw SchemaError("field '" + std::string(key) + "' in " + ctx +
                      " must be a string");
  return v.get<std::string>();
}

const std::set<std::string>& unit_vocabulary() {
  static const std::set<std::string> units = {"m",   "kg",  "N·m", "N*m",
                                              "s",   "rad", "rad/s", "V"};
  return units;
}

int find_param(const RobotModel& model, const std::string& name,
               const std::string& ctx) {
  for (size_t i = 0; i < model.params.size(); ++i)
    if (model.params[i].name == name) return static_cast<int>(i);
  throw SchemaError("unknown parameter '" + name + "' in " + ctx);
}

ParamValue parse_value(const json& j, const RobotModel& model,
                       const std::string& ctx) {
  ParamValue v;
  if (j.is_number()) {
    v.constant = j.get<double>();
    return v;
  }
  if (j.is_string()) {
    v.param = find_param(model, j.get<std::string>(), ctx);
    return v;
  }
  if (j.is_object()) {
    v.param = find_param(model, string_at(j, "param", ctx), ctx);
    v.scale = j.value("scale", 1.0);
    v.constant = j.value("offset", 0.0);
    return v;
  }
  throw SchemaError("value in " + ctx +
                    " must be a number, parameter name, or {param,scale,offset}");
}

void parse_value3(const json& j, const RobotModel& model,
                  const std::string& ctx, ParamValue out[3]) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(ctx + " must be an array of 3 values");
  for (int a = 0; a < 3; ++a) out[a] = parse_value(j[a], model, ctx);
}

void parse_double3(const json& j, const std::string& ctx, double out[3]) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(ctx + " must be an array of 3 numbers");
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw SchemaError(ctx + " must hold numbers");
    out[a] = j[a].get<double>();
  }
}

std::vector<double> parse_numbers(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw SchemaError(ctx + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) throw SchemaError(ctx + " must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Terrain parse_terrain(const json& j) {
  Terrain t;
  if (j.is_null()) return t;
  std::string kind = j.value("kind", std::string("flat"));
  t.mu = j.value("mu", 1.0);
  if (kind == "flat") {
    t.kind = Terrain::Kind::Flat;
  } else if (kind == "grid") {
    t.kind = Terrain::Kind::Grid;
    t.grid_origin = j.value("origin", 0.0);
    t.cell_size = number_at(j, "cell_size", "terrain");
    if (t.cell_size <= 0) throw SchemaError("terrain cell_size must be > 0");
    t.heights = parse_numbers(require(j, "heights", "terrain"), "terrain.heights");
    if (t.heights.empty()) throw SchemaError("terrain.heights must be non-empty");
  } else {
    throw SchemaError("unknown terrain kind '" + kind + "'");
  }
  return t;
}

std::vector<int> parse_knot_set(const json& j, int K, const std::string& ctx) {
  // Knot indices are 1-based in files, 0-based internally.
  std::vector<int> knots;
  if (auto it = j.find("knot"); it != j.end()) {
    knots.push_back(it->get<int>() - 1);
  } else if (auto its = j.find("knots"); its != j.end()) {
    if (its->is_string() && its->get<std::string>() == "all") {
      for (int k = 0; k < K; ++k) knots.push_back(k);
    } else if (its->is_array()) {
      for (const auto& e : *its) knots.push_back(e.get<int>() - 1);
    } else {
      throw SchemaError(ctx + ".knots must be an array or \"all\"");
    }
  } else {
    throw SchemaError(ctx + " needs 'knot' or 'knots'");
  }
  for (int k : knots)
    if (k < 0 || k >= K)
      throw SchemaError(ctx + " knot index out of range [1, " +
                        std::to_string(K) + "]");
  return knots;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

}  // namespace

RobotModel parse_robot_spec(const std::string& text) {
  json j = parse_json(text, "robot spec");
  RobotModel model;
  model.name = j.value("name", std::string("robot"));
  model.gravity = j.value("gravity", 9.81);
  model.structural_mass = j.value("structural_mass", 0.0);

  for (const auto& pj : j.value("parameters", json::array())) {
    ParamDecl p;
    p.name = string_at(pj, "name", "parameter");
    const std::string ctx = "parameter '" + p.name + "'";
    if (!pj.contains("lower") || !pj.contains("upper"))
      throw MissingBounds(ctx + " lacks lower/upper bounds");
    p.lower = number_at(pj, "lower", ctx);
    p.upper = number_at(pj, "upper", ctx);
    p.initial = pj.value("initial", 0.5 * (p.lower + p.upper));
    p.unit = pj.value("unit", std::string("m"));
    if (!unit_vocabulary().count(p.unit))
      throw SchemaError(ctx + " has unknown unit '" + p.unit + "'");
    model.params.push_back(std::move(p));
  }

  for (const auto& lj : require(j, "links", "robot spec")) {
    Link l;
    l.name = string_at(lj, "name", "link");
    const std::string ctx = "link '" + l.name + "'";
    l.mass = parse_value(require(lj, "mass", ctx), model, ctx + ".mass");
    if (lj.contains("com"))
      parse_value3(lj["com"], model, ctx + ".com", l.com);
    if (lj.contains("box")) {
      l.has_box = true;
      parse_value3(lj["box"], model, ctx + ".box", l.extents);
    }
    if (lj.contains("inertia")) {
      const json& ij = lj["inertia"];
      if (ij.is_string()) {
        std::string kind = ij.get<std::string>();
        if (kind == "box") {
          if (!l.has_box)
            throw SchemaError(ctx + ": box inertia needs box extents");
          l.inertia_kind = InertiaKind::BoxFormula;
        } else if (kind == "none") {
          l.inertia_kind = InertiaKind::None;
        } else {
          throw SchemaError(ctx + ": unknown inertia kind '" + kind + "'");
        }
      } else if (ij.is_array()) {
        l.inertia_kind = InertiaKind::FixedDiag;
        parse_double3(ij, ctx + ".inertia", l.fixed_diag);
      } else {
        throw SchemaError(ctx + ".inertia must be \"box\", \"none\", or [ixx,iyy,izz]");
      }
    } else if (l.has_box) {
      l.inertia_kind = InertiaKind::BoxFormula;
    }
    model.links.push_back(std::move(l));
  }

  for (const auto& jj : require(j, "joints", "robot spec")) {
    Joint jt;
    jt.name = string_at(jj, "name", "joint");
    const std::string ctx = "joint '" + jt.name + "'";
    std::string type = string_at(jj, "type", ctx);
    if (type == "revolute") jt.type = JointType::Revolute;
    else if (type == "prismatic") jt.type = JointType::Prismatic;
    else if (type == "floating") jt.type = JointType::Floating;
    else throw SchemaError(ctx + ": unknown joint type '" + type + "'");
    std::string parent = string_at(jj, "parent", ctx);
    if (parent == "world") {
      jt.parent_link = -1;
    } else {
      jt.parent_link = model.link_index(parent);
      if (jt.parent_link < 0)
        throw SchemaError(ctx + ": unknown parent link '" + parent + "'");
    }
    jt.child_link = model.link_index(string_at(jj, "child", ctx));
    if (jt.child_link < 0) throw SchemaError(ctx + ": unknown child link");
    if (jj.contains("origin"))
      parse_value3(jj["origin"], model, ctx + ".origin", jt.origin_xyz);
    if (jj.contains("axis")) parse_double3(jj["axis"], ctx + ".axis", jt.axis);
    jt.actuated = jj.value("actuated", false);
    model.joints.push_back(std::move(jt));
  }

  for (const auto& aj : j.value("actuators", json::array())) {
    Actuator a;
    a.name = aj.value("name", std::string("actuator"));
    const std::string ctx = "actuator '" + a.name + "'";
    std::string type = aj.value("type", std::string("joint"));
    if (type == "joint") {
      a.kind = ActuatorKind::JointTorque;
      a.joint = model.joint_index(string_at(aj, "joint", ctx));
      if (a.joint < 0) throw SchemaError(ctx + ": unknown joint");
    } else if (type == "thruster") {
      a.kind = ActuatorKind::PointThruster;
      a.link = model.link_index(string_at(aj, "link", ctx));
      if (a.link < 0) throw SchemaError(ctx + ": unknown link");
      if (aj.contains("point"))
        parse_value3(aj["point"], model, ctx + ".point", a.point);
      if (aj.contains("direction"))
        parse_double3(aj["direction"], ctx + ".direction", a.direction);
    } else {
      throw SchemaError(ctx + ": unknown actuator type '" + type + "'");
    }
    a.limit = aj.value("limit", 0.0);
    model.actuators.push_back(std::move(a));
  }

  for (const auto& cj : j.value("contacts", json::array())) {
    ContactPoint c;
    c.link = model.link_index(string_at(cj, "link", "contact"));
    if (c.link < 0) throw SchemaError("contact references unknown link");
    if (cj.contains("offset"))
      parse_value3(cj["offset"], model, "contact.offset", c.offset);
    model.contacts.push_back(std::move(c));
  }

  for (const auto& cj : j.value("couplings", json::array())) {
    Coupling c;
    c.param = find_param(model, string_at(cj, "parameter", "coupling"),
                         "coupling");
    std::string curve = cj.value("curve", std::string("mass"));
    if (curve == "mass") c.curve = Coupling::Curve::Mass;
    else if (curve == "x") c.curve = Coupling::Curve::X;
    else if (curve == "y") c.curve = Coupling::Curve::Y;
    else if (curve == "z") c.curve = Coupling::Curve::Z;
    else throw SchemaError("unknown coupling curve '" + curve + "'");
    c.multiplier = cj.value("multiplier", 1.0);
    c.offset = cj.value("offset", 0.0);
    c.add_structural_mass = cj.value("add_structural_mass", false);
    model.couplings.push_back(c);
  }

  model.validate();
  return model;
}

TaskSpec parse_task_spec(const std::string& text, const RobotModel& robot) {
  json j = parse_json(text, "task spec");
  TaskSpec task;
  task.knots = static_cast<int>(number_at(j, "knots", "task spec"));
  if (task.knots < 2) throw SchemaError("task needs at least 2 knots");
  task.duration_max = number_at(j, "duration_max", "task spec");
  if (task.duration_max <= 0) throw SchemaError("duration_max must be > 0");
  task.terrain = parse_terrain(j.value("terrain", json()));
  task.seed = j.value("seed", 0ull);
  if (j.contains("dt_window")) {
    const json& w = j["dt_window"];
    if (!w.is_array() || w.size() != 2)
      throw SchemaError("dt_window must be [min_factor, max_factor]");
    task.dt_min_factor = w[0].get<double>();
    task.dt_max_factor = w[1].get<double>();
    if (!(task.dt_min_factor > 0) ||
        task.dt_max_factor < task.dt_min_factor)
      throw SchemaError("dt_window factors must be positive and ordered");
  }

  if (j.contains("objective")) {
    const json& oj = j["objective"];
    std::string mode = oj.value("mode", std::string("actuation"));
    if (mode == "actuation") task.objective.mode = ObjectiveSpec::Mode::Actuation;
    else if (mode == "time") task.objective.mode = ObjectiveSpec::Mode::Time;
    else throw SchemaError("unknown objective mode '" + mode + "'");
    task.objective.alpha = oj.value("alpha", 1.0);
    task.objective.beta = oj.value("beta", 0.0);
    if (task.objective.alpha < 0 || task.objective.beta < 0)
      throw SchemaError("objective weights must be >= 0");
  }

  const int n = robot.nq();
  for (const auto& kj : require(j, "keyframes", "task spec")) {
    Keyframe kf;
    kf.knot = static_cast<int>(number_at(kj, "knot", "keyframe")) - 1;
    if (kf.knot < 0 || kf.knot >= task.knots)
      throw SchemaError("keyframe knot out of range");
    kf.q = parse_numbers(require(kj, "q", "keyframe"), "keyframe.q");
    if (static_cast<int>(kf.q.size()) != n)
      throw BadKeyframe("keyframe q has " + std::to_string(kf.q.size()) +
                        " entries, robot has " + std::to_string(n) + " DOFs");
    task.keyframes.push_back(std::move(kf));
  }
  if (task.keyframes.size() < 2)
    throw SchemaError("task needs at least 2 keyframes");

  for (const auto& cj : j.value("constraints", json::array())) {
    TaskConstraint c;
    std::string kind = string_at(cj, "kind", "task constraint");
    const std::string ctx = "constraint kind '" + kind + "'";
    c.knots = parse_knot_set(cj, task.knots, ctx);
    if (kind == "config" || kind == "velocity") {
      c.kind = kind == "config" ? TaskConstraint::Kind::ConfigEquality
                                : TaskConstraint::Kind::DofVelocity;
      for (const auto& d : require(cj, "dofs", ctx)) c.dofs.push_back(d.get<int>());
      c.values = parse_numbers(require(cj, "values", ctx), ctx + ".values");
      if (c.dofs.size() != c.values.size())
        throw SchemaError(ctx + ": dofs and values differ in length");
      for (int d : c.dofs)
        if (d < 0 || d >= n) throw SchemaError(ctx + ": DOF index out of range");
    } else if (kind == "point") {
      c.kind = TaskConstraint::Kind::PointPosition;
      c.link = robot.link_index(string_at(cj, "link", ctx));
      if (c.link < 0) throw SchemaError(ctx + ": unknown link");
      if (cj.contains("point"))
        parse_double3(cj["point"], ctx + ".point", c.local_point);
      for (int ax = 0; ax < 3; ++ax) c.axis_active[ax] = false;
      if (cj.contains("target")) {
        const json& a = cj["target"];
        if (!a.is_array() || a.size() != 3)
          throw SchemaError(ctx + ".target must be an array of 3");
        for (int ax = 0; ax < 3; ++ax)
          if (!a[ax].is_null()) {
            c.axis_active[ax] = true;
            c.lower[ax] = c.upper[ax] = a[ax].get<double>();
          }
      } else {
        for (int ax = 0; ax < 3; ++ax) {
          c.lower[ax] = -1e30;
          c.upper[ax] = 1e30;
        }
        bool any = false;
        if (cj.contains("lower")) {
          const json& a = cj["lower"];
          for (int ax = 0; ax < 3; ++ax)
            if (!a[ax].is_null()) {
              c.axis_active[ax] = true;
              c.lower[ax] = a[ax].get<double>();
              any = true;
            }
        }
        if (cj.contains("upper")) {
          const json& a = cj["upper"];
          for (int ax = 0; ax < 3; ++ax)
            if (!a[ax].is_null()) {
              c.axis_active[ax] = true;
              c.upper[ax] = a[ax].get<double>();
              any = true;
            }
        }
        if (!any) throw SchemaError(ctx + " needs 'target' or 'lower'/'upper'");
      }
    } else if (kind == "com_height") {
      c.kind = TaskConstraint::Kind::ComHeightWindow;
      c.lower[2] = cj.value("lower", -1e30);
      c.upper[2] = cj.value("upper", 1e30);
    } else {
      throw SchemaError("unknown task constraint kind '" + kind + "'");
    }
    task.constraints.push_back(std::move(c));
  }
  return task;
}

MotorLibrary parse_motor_library(const std::string& text) {
  json j = parse_json(text, "motor library");
  const json& arr = j.is_array() ? j : require(j, "motors", "motor library");
  if (!arr.is_array() || arr.empty())
    throw SchemaError("motor library must hold at least one motor");
  std::vector<MotorSpec> motors;
  for (const auto& mj : arr) {
    MotorSpec m;
    m.name = string_at(mj, "name", "motor");
    const std::string ctx = "motor '" + m.name + "'";
    m.extent_x = number_at(mj, "extent_x", ctx);
    m.extent_y = number_at(mj, "extent_y", ctx);
    m.extent_z = number_at(mj, "extent_z", ctx);
    m.mass = number_at(mj, "mass", ctx);
    m.max_torque = number_at(mj, "max_torque", ctx);
    m.voltage = mj.value("voltage", 0.0);
    m.top_speed = mj.value("top_speed", 0.0);
    motors.push_back(std::move(m));
  }
  return MotorLibrary(std::move(motors));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write file: " + path);
  out << content;
}

RobotModel load_robot_spec(const std::string& path) {
  return parse_robot_spec(read_file(path));
}
TaskSpec load_task_spec(const std::string& path, const RobotModel& robot) {
  return parse_task_spec(read_file(path), robot);
}
MotorLibrary load_motor_library(const std::string& path) {
  return parse_motor_library(read_file(path));
}

std::string export_result_json(const ResultDocument& r) {
  json j;
  j["status"] = r.status;
  json params = json::array();
  for (size_t i = 0; i < r.rho.size(); ++i) {
    json p;
    p["name"] = i < r.param_names.size() ? r.param_names[i] : "";
    p["value"] = r.rho[i];
    p["unit"] = i < r.param_units.size() ? r.param_units[i] : "";
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  j["selected_motor"] = r.selected_motor;
  j["xi"] = r.xi;
  j["objective"] = {{"g_act", r.g_act}, {"g_reg", r.g_reg}, {"total", r.objective}};
  json traj = json::array();
  for (size_t k = 0; k < r.times.size(); ++k) {
    json row;
    row["t"] = r.times[k];
    row["q"] = r.q[k];
    row["qd"] = r.qd[k];
    row["u"] = r.u[k];
    row["lambda"] = r.lambda[k];
    traj.push_back(std::move(row));
  }
  j["trajectory"] = std::move(traj);
  j["residuals"] = r.residuals;
  j["solver"] = {{"seed", r.seed},
                 {"iterations", r.iterations},
                 {"wall_time", r.wall_time}};
  return j.dump(2) + "\n";
}

std::string export_result_csv(const ResultDocument& r) {
  std::ostringstream out;
  const size_t n = r.q.empty() ? 0 : r.q[0].size();
  const size_t m = r.u.empty() ? 0 : r.u[0].size();
  const size_t lam = r.lambda.empty() ? 0 : r.lambda[0].size();
  out << "t";
  for (size_t i = 0; i < n; ++i) out << ",q" << i;
  for (size_t i = 0; i < n; ++i) out << ",qd" << i;
  for (size_t i = 0; i < m; ++i) out << ",u" << i;
  for (size_t i = 0; i < lam; ++i) out << ",lam" << i;
  out << "\n";
  for (size_t k = 0; k < r.times.size(); ++k) {
    out << fmt(r.times[k]);
    for (double v : r.q[k]) out << "," << fmt(v);
    for (double v : r.qd[k]) out << "," << fmt(v);
    for (double v : r.u[k]) out << "," << fmt(v);
    for (double v : r.lambda[k]) out << "," << fmt(v);
    out << "\n";
  }
  return out.str();
}

ResultDocument parse_result(const std::string& text) {
  json j = parse_json(text, "result document");
  ResultDocument r;
  r.status = j.value("status", std::string());
  for (const auto& p : j.value("parameters", json::array())) {
    r.param_names.push_back(p.value("name", std::string()));
    r.param_units.push_back(p.value("unit", std::string()));
    r.rho.push_back(number_at(p, "value", "result parameter"));
  }
  r.selected_motor = j.value("selected_motor", std::string());
  r.xi = j.value("xi", 0.0);
  if (j.contains("objective")) {
    r.g_act = j["objective"].value("g_act", 0.0);
    r.g_reg = j["objective"].value("g_reg", 0.0);
    r.objective = j["objective"].value("total", 0.0);
  }
  for (const auto& row : j.value("trajectory", json::array())) {
    r.times.push_back(number_at(row, "t", "trajectory row"));
    r.q.push_back(parse_numbers(require(row, "q", "trajectory row"), "q"));
    r.qd.push_back(parse_numbers(require(row, "qd", "trajectory row"), "qd"));
    r.u.push_back(parse_numbers(require(row, "u", "trajectory row"), "u"));
    r.lambda.push_back(
        parse_numbers(require(row, "lambda", "trajectory row"), "lambda"));
  }
  if (j.contains("residuals"))
    for (auto it = j["residuals"].begin(); it != j["residuals"].end(); ++it)
      r.residuals[it.key()] = it.value().get<double>();
  if (j.contains("solver")) {
    r.seed = j["solver"].value("seed", 0ull);
    r.iterations = j["solver"].value("iterations", 0);
    r.wall_time = j["solver"].value("wall_time", 0.0);
  }
  return r;
}

ResultDocument make_result_document(const RobotModel& robot,
                                    const NlpProblem& problem,
                                    const SolveResult& res,
                                    const MotorLibrary* motors,
                                    uint64_t seed) {
  const DecisionLayout& lay = problem.layout;
  ResultDocument doc;
  doc.status = status_name(res.status);
  for (const auto& p : robot.params) {
    doc.param_names.push_back(p.name);
    doc.param_units.push_back(p.unit);
  }
  for (int i = 0; i < lay.p; ++i) doc.rho.push_back(res.x[lay.rho_index(i)]);
  doc.xi = res.x[lay.xi_index()];
  if (motors && lay.m > 0) {
    try {
      doc.selected_motor = motors->select_motor(doc.xi).name;
    } catch (const InfeasibleTorque&) {
      doc.selected_motor = "";
    }
  }
  double t = 0;
  for (int k = 0; k < lay.K; ++k) {
    doc.times.push_back(t);
    if (k + 1 < lay.K) t += res.x[lay.dt_index(k)];
    std::vector<double> q(lay.n), qd(lay.n), u(lay.m), lam(6 * lay.l);
    for (int i = 0; i < lay.n; ++i) q[i] = res.x[lay.q_index(k, i)];
    for (int i = 0; i < lay.n; ++i) qd[i] = res.x[lay.qd_index(k, i)];
    for (int j2 = 0; j2 < lay.m; ++j2) u[j2] = res.x[lay.u_index(k, j2)];
    for (int c = 0; c < lay.l; ++c)
      for (int comp = 0; comp < 6; ++comp)
        lam[6 * c + comp] = res.x[lay.lambda_index(k, c, comp)];
    doc.q.push_back(std::move(q));
    doc.qd.push_back(std::move(qd));
    doc.u.push_back(std::move(u));
    doc.lambda.push_back(std::move(lam));
  }
  double g_act = problem.objective_spec.alpha * doc.xi;
  double g_reg = 0;
  for (int i = 0; i < lay.p; ++i) {
    double d = doc.rho[i] - problem.rho0[i];
    g_reg += 0.5 * d * d;
  }
  g_reg *= problem.objective_spec.beta;
  doc.g_act = g_act;
  doc.g_reg = g_reg;
  doc.objective = res.objective;
  doc.residuals = res.family_violation;
  doc.seed = seed;
  doc.iterations = res.iterations;
  doc.wall_time = res.wall_time;
  return doc;
}

std::vector<double> reconstruct_decision_vector(const NlpProblem& problem,
                                                const ResultDocument& doc,
                                                double slack) {
  const DecisionLayout& lay = problem.layout;
  if (static_cast<int>(doc.times.size()) != lay.K ||
      static_cast<int>(doc.rho.size()) != lay.p)
    throw SchemaError("result dimensions do not match the problem (K=" +
                      std::to_string(doc.times.size()) + " vs " +
                      std::to_string(lay.K) + ", p=" +
                      std::to_string(doc.rho.size()) + " vs " +
                      std::to_string(lay.p) + ")");
  for (int k = 0; k < lay.K; ++k)
    if (static_cast<int>(doc.q[k].size()) != lay.n ||
        static_cast<int>(doc.qd[k].size()) != lay.n ||
        static_cast<int>(doc.u[k].size()) != lay.m ||
        static_cast<int>(doc.lambda[k].size()) != 6 * lay.l)
      throw SchemaError("result row " + std::to_string(k) +
                        " has inconsistent dimensions");

  std::vector<double> x(lay.total(), 0.0);
  for (int k = 0; k < lay.K; ++k) {
    for (int i = 0; i < lay.n; ++i) x[lay.q_index(k, i)] = doc.q[k][i];
    for (int i = 0; i < lay.n; ++i) x[lay.qd_index(k, i)] = doc.qd[k][i];
    for (int j = 0; j < lay.m; ++j) x[lay.u_index(k, j)] = doc.u[k][j];
    for (int c = 0; c < lay.l; ++c)
      for (int comp = 0; comp < 6; ++comp)
        x[lay.lambda_index(k, c, comp)] = doc.lambda[k][6 * c + comp];
    if (k + 1 < lay.K)
      x[lay.dt_index(k)] = doc.times[k + 1] - doc.times[k];
  }
  for (int i = 0; i < lay.p; ++i) x[lay.rho_index(i)] = doc.rho[i];
  x[lay.xi_index()] = doc.xi;
  for (int idx : problem.slack_indices) x[idx] = slack;
  return x;
}

}  // namespace cotraj
