#include "cotraj/robot.hpp"

#include <algorithm>
#include <cmath>

namespace cotraj {

double Terrain::height_at(double x, double /*y*/) const {
  if (kind == Kind::Flat) return 0.0;
  if (heights.empty()) return 0.0;
  double rel = (x - grid_origin) / cell_size;
  // Ties at cell edges resolve toward the lower-index cell.
  long cell = std::lround(std::ceil(rel)) - 1;
  if (rel > std::floor(rel)) cell = static_cast<long>(std::floor(rel));
  cell = std::clamp(cell, 0L, static_cast<long>(heights.size()) - 1);
  return heights[static_cast<std::size_t>(cell)];
}

int RobotModel::nq() const {
  int n = 0;
  for (const auto& j : joints) n += j.dof();
  return n;
}

int RobotModel::link_index(const std::string& n) const {
  for (std::size_t i = 0; i < links.size(); ++i)
    if (links[i].name == n) return static_cast<int>(i);
  return -1;
}

int RobotModel::joint_index(const std::string& n) const {
  for (std::size_t i = 0; i < joints.size(); ++i)
    if (joints[i].name == n) return static_cast<int>(i);
  return -1;
}

int RobotModel::param_index(const std::string& n) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == n) return static_cast<int>(i);
  return -1;
}

std::vector<double> RobotModel::initial_params() const {
  std::vector<double> rho;
  rho.reserve(params.size());
  for (const auto& p : params) rho.push_back(p.initial);
  return rho;
}

double RobotModel::total_mass(std::span<const double> rho) const {
  double m = 0;
  for (const auto& l : links) m += l.mass.value(rho);
  return m;
}

namespace {

void check_param_ref(const RobotModel& model, const ParamValue& v,
                     const std::string& where) {
  if (v.param < 0) return;
  if (v.param >= model.num_params())
    throw ModelError("undeclared parameter referenced by " + where);
}

}  // namespace

void RobotModel::validate() const {
  const int nl = static_cast<int>(links.size());
  if (nl == 0) throw ModelError("model has no links");

  for (const auto& p : params) {
    if (!(p.lower <= p.initial && p.initial <= p.upper))
      throw MissingBounds("parameter " + p.name +
                          " initial value outside [lower, upper]");
    if (!std::isfinite(p.lower) || !std::isfinite(p.upper))
      throw MissingBounds("parameter " + p.name + " lacks finite bounds");
  }

  // Every non-root link has exactly one parent joint; no cycles.
  std::vector<int> parent_count(nl, 0);
  for (const auto& j : joints) {
    if (j.child_link < 0 || j.child_link >= nl)
      throw ModelError("joint " + j.name + " has invalid child link");
    if (j.parent_link >= nl)
      throw ModelError("joint " + j.name + " has invalid parent link");
    parent_count[j.child_link]++;
  }
  int roots = 0;
  for (int i = 0; i < nl; ++i) {
    if (parent_count[i] == 0) roots++;
    if (parent_count[i] > 1)
      throw CycleError("link " + links[i].name + " has multiple parent joints");
  }
  if (static_cast<int>(joints.size()) != nl)
    throw ModelError("expected one joint per link (world joints included)");
  if (roots != 0)
    throw ModelError("every link needs a parent joint (use a world joint)");
  // Reachability from world: detects cycles among links.
  std::vector<bool> reached(nl, false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& j : joints) {
      bool parent_ok = j.parent_link < 0 || reached[j.parent_link];
      if (parent_ok && !reached[j.child_link]) {
        reached[j.child_link] = true;
        progress = true;
      }
    }
  }
  for (int i = 0; i < nl; ++i)
    if (!reached[i])
      throw CycleError("link " + links[i].name + " is not reachable from the world");

  for (const auto& l : links) {
    check_param_ref(*this, l.mass, "link " + l.name + " mass");
    for (int a = 0; a < 3; ++a) {
      check_param_ref(*this, l.com[a], "link " + l.name + " com");
      if (l.has_box) check_param_ref(*this, l.extents[a], "link " + l.name + " extents");
    }
    if (l.inertia_kind == InertiaKind::BoxFormula && !l.has_box)
      throw ModelError("link " + l.name + " uses the box inertia without geometry");
  }
  for (const auto& j : joints)
    for (int a = 0; a < 3; ++a)
      check_param_ref(*this, j.origin_xyz[a], "joint " + j.name + " origin");
  for (const auto& c : contacts) {
    if (c.link < 0 || c.link >= nl) throw ModelError("contact on invalid link");
    for (int a = 0; a < 3; ++a)
      check_param_ref(*this, c.offset[a], "contact offset");
  }
  for (const auto& a : actuators) {
    if (a.kind == ActuatorKind::JointTorque) {
      if (a.joint < 0 || a.joint >= static_cast<int>(joints.size()))
        throw ModelError("actuator " + a.name + " drives an invalid joint");
      if (joints[a.joint].type == JointType::Floating)
        throw ModelError("actuator " + a.name + " cannot drive a floating joint");
    } else {
      if (a.link < 0 || a.link >= nl)
        throw ModelError("thruster " + a.name + " attached to an invalid link");
    }
  }
  for (const auto& c : couplings)
    if (c.param < 0 || c.param >= num_params())
      throw ModelError("coupling references an undeclared parameter");
}

}  // namespace cotraj
