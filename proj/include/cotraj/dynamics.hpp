#pragma once

#include <vector>

#include "cotraj/robot.hpp"
#include "cotraj/spatial.hpp"

namespace cotraj {

struct SingularMassMatrix : EvalError {
  using EvalError::EvalError;
};

/// Parametric box inertia about the COM: diag(m(w^2+d^2), m(L^2+d^2),
/// m(L^2+w^2)) / 12.
Mat3 box_inertia(const Expr& m, const Expr& L, const Expr& w, const Expr& d);

/// Single-DOF kinematic element; floating joints expand into six of these
/// (x, y, z translations, then yaw-pitch-roll rotations) so every
/// tree algorithm below only ever sees revolute/prismatic elements.
struct ChainElement {
  bool prismatic = false;
  Vec3 axis;            // constant, in the element's local frame
  int q_index = -1;     // row in q
  int parent = -1;      // chain index, -1 for world
  int link = -1;        // model link carried by this element, -1 if massless
  int model_joint = -1;
  Pose origin;          // fixed transform from parent element frame
};

class Kinematics {
 public:
  Kinematics(const RobotModel& model, std::span<const Expr> rho);

  const RobotModel& model() const { return *model_; }
  int nq() const { return nq_; }
  const std::vector<ChainElement>& chain() const { return chain_; }
  int chain_of_link(int link) const { return link_to_chain_[link]; }

  /// World pose of every chain element frame.
  std::vector<Pose> frames(std::span<const Expr> q) const;

  /// World pose of a model link frame.
  Pose link_pose(const std::vector<Pose>& frames, int link) const;

  /// World position of a point given in a link's local frame.
  Vec3 point_position(const std::vector<Pose>& frames, int link,
                      const Vec3& local) const;

  /// Geometric Jacobian (3 rows x n columns) of a world point on a link.
  std::array<std::vector<Expr>, 3> point_jacobian(
      const std::vector<Pose>& frames, int link, const Vec3& world_point) const;

  /// Spatial inertia of a model link about its own frame origin.
  SpatialInertia link_inertia(int link) const;

  std::span<const Expr> rho() const { return rho_; }

 private:
  const RobotModel* model_;
  std::vector<Expr> rho_;
  std::vector<ChainElement> chain_;
  std::vector<int> link_to_chain_;
  int nq_ = 0;
};

/// World poses of every model link (indexed by link).
std::vector<Pose> forward_kinematics(const Kinematics& kin,
                                     std::span<const Expr> q);

/// Joint-space mass matrix via the composite rigid-body algorithm.
/// Row-major n x n, symmetric by construction.
std::vector<std::vector<Expr>> mass_matrix(const Kinematics& kin,
                                           std::span<const Expr> q);

/// Full inverse dynamics: tau = H qdd + C qd + g (gravity optional).
std::vector<Expr> inverse_dynamics(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> qd,
                                   std::span<const Expr> qdd,
                                   bool with_gravity = true);

/// Coriolis/centrifugal plus gravity generalized forces, via the
/// recursive Newton-Euler pass with zero joint acceleration.
std::vector<Expr> bias_forces(const Kinematics& kin, std::span<const Expr> q,
                              std::span<const Expr> qd,
                              bool with_gravity = true);

struct ContactKinematics {
  Expr phi;                                  // signed distance
  Expr psi_x, psi_y;                          // tangential velocity
  std::array<std::vector<Expr>, 3> jacobian;  // 3 x n world-point Jacobian
  Vec3 world_point;
};

/// Signed distances, tangential velocities, and contact Jacobians for all
/// declared contact points. For grid terrain the cell height is taken from
/// `grid_cell_hint` (one height per contact) since cell membership is not a
/// smooth function of q; flat terrain needs no hint.
std::vector<ContactKinematics> contact_kinematics(
    const Kinematics& kin, const Terrain& terrain, std::span<const Expr> q,
    std::span<const Expr> qd, std::span<const double> cell_height_hint = {});

/// Generalized actuation forces B(q) u (joint torques and point thrusters).
std::vector<Expr> actuation_forces(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> u);

/// Symbolic solve of A x = b through an LDL^T factorization. Pivots carry
/// the usual division contract: A must be positive definite wherever the
/// result is evaluated.
std::vector<Expr> ldlt_solve(const std::vector<std::vector<Expr>>& A,
                             std::vector<Expr> b);

/// q-ddot from the manipulator equations:
/// H qdd = B u + J^T lambda - (C qd + g). `contact_lambda` holds one world
/// force (3 exprs) per contact point, already combined from the friction
/// decomposition; pass empty when l = 0.
std::vector<Expr> forward_dynamics(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> qd,
                                   std::span<const Expr> u,
                                   std::span<const Vec3> contact_lambda);

}  // namespace cotraj
