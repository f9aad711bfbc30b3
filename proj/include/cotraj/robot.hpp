#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotraj/expr.hpp"
#include "cotraj/spatial.hpp"

namespace cotraj {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CycleError : ModelError {
  using ModelError::ModelError;
};
struct MissingBounds : ModelError {
  using ModelError::ModelError;
};

/// Scalar that is either a constant or affine in one design parameter:
/// value = constant + scale * rho[param].
struct ParamValue {
  double constant = 0.0;
  int param = -1;
  double scale = 1.0;

  bool is_constant() const { return param < 0; }
  Expr expr(std::span<const Expr> rho) const {
    if (param < 0) return Expr(constant);
    return Expr(constant) + Expr(scale) * rho[param];
  }
  double value(std::span<const double> rho) const {
    if (param < 0) return constant;
    return constant + scale * rho[param];
  }
};

struct ParamDecl {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double initial = 0.0;
  std::string unit;
};

enum class JointType { Revolute, Prismatic, Floating };

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  int parent_link = -1;  // -1 means world
  int child_link = -1;
  ParamValue origin_xyz[3];  // joint frame offset in the parent link frame
  double axis[3] = {0, 0, 1};
  bool actuated = false;

  int dof() const { return type == JointType::Floating ? 6 : 1; }
};

enum class InertiaKind { BoxFormula, FixedDiag, None };

struct Link {
  std::string name;
  ParamValue mass;            // kg
  ParamValue com[3];          // local frame
  bool has_box = false;       // rectangular-prism geometry declared
  ParamValue extents[3];      // L (x), w (y), d (z) when has_box
  InertiaKind inertia_kind = InertiaKind::None;
  double fixed_diag[3] = {0, 0, 0};  // about the COM, local axes
};

enum class ActuatorKind { JointTorque, PointThruster };

struct Actuator {
  std::string name;
  ActuatorKind kind = ActuatorKind::JointTorque;
  int joint = -1;            // JointTorque: driven joint
  int link = -1;             // PointThruster: attachment link
  ParamValue point[3];       // PointThruster: attachment in link frame
  double direction[3] = {0, 0, 1};  // PointThruster: force axis, link frame
  double limit = 0.0;        // |u| bound; 0 means take it from the motor library
};

struct ContactPoint {
  int link = -1;
  ParamValue offset[3];  // link frame
};

/// Fabrication coupling: parameter >= multiplier * bound_curve(xi) + offset
/// (+ structural mass when the flag is set).
struct Coupling {
  int param = -1;
  enum class Curve { Mass, X, Y, Z } curve = Curve::Mass;
  double multiplier = 1.0;
  double offset = 0.0;
  bool add_structural_mass = false;
};

struct Terrain {
  enum class Kind { Flat, Grid } kind = Kind::Flat;
  double mu = 1.0;
  // Grid: piecewise-constant heights over cells along x, infinite strips in y.
  double grid_origin = 0.0;
  double cell_size = 1.0;
  std::vector<double> heights;

  /// Height under (x, y); grid-edge ties go to the lower-index cell.
  double height_at(double x, double y) const;
};

struct RobotModel {
  std::string name;
  double gravity = 9.81;
  double structural_mass = 0.0;
  std::vector<ParamDecl> params;
  std::vector<Link> links;    // root first
  std::vector<Joint> joints;
  std::vector<Actuator> actuators;
  std::vector<ContactPoint> contacts;
  std::vector<Coupling> couplings;

  int nq() const;                  // configuration dimension n
  int num_actuators() const { return static_cast<int>(actuators.size()); }
  int num_contacts() const { return static_cast<int>(contacts.size()); }
  int num_params() const { return static_cast<int>(params.size()); }

  int link_index(const std::string& n) const;
  int joint_index(const std::string& n) const;
  int param_index(const std::string& n) const;

  std::vector<double> initial_params() const;
  double total_mass(std::span<const double> rho) const;

  /// Tree structure, parameter references, bounds. Throws on violation.
  void validate() const;
};

}  // namespace cotraj
