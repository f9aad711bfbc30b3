#include "cotraj/dynamics.hpp"

#include <cmath>

namespace cotraj {

Mat3 box_inertia(const Expr& m, const Expr& L, const Expr& w, const Expr& d) {
  Expr twelfth(1.0 / 12.0);
  Expr L2 = L * L, w2 = w * w, d2 = d * d;
  return Mat3::diag(m * (w2 + d2) * twelfth, m * (L2 + d2) * twelfth,
                    m * (L2 + w2) * twelfth);
}

namespace {

Vec3 const_vec(const double a[3]) { return Vec3::of(a[0], a[1], a[2]); }

Vec3 param_vec(const ParamValue v[3], std::span<const Expr> rho) {
  return {v[0].expr(rho), v[1].expr(rho), v[2].expr(rho)};
}

}  // namespace

Kinematics::Kinematics(const RobotModel& model, std::span<const Expr> rho)
    : model_(&model), rho_(rho.begin(), rho.end()) {
  if (static_cast<int>(rho_.size()) != model.num_params())
    throw ModelError("parameter vector length mismatch");
  link_to_chain_.assign(model.links.size(), -1);

  // Joints may be declared in any tree order; expand parents first.
  std::vector<bool> done(model.joints.size(), false);
  std::size_t remaining = model.joints.size();
  while (remaining > 0) {
    bool progress = false;
    for (std::size_t ji = 0; ji < model.joints.size(); ++ji) {
      const Joint& j = model.joints[ji];
      if (done[ji]) continue;
      int parent_chain = -1;
      if (j.parent_link >= 0) {
        parent_chain = link_to_chain_[j.parent_link];
        if (parent_chain < 0) continue;  // parent not expanded yet
      }
      Pose origin = Pose::identity();
      origin.p = param_vec(j.origin_xyz, rho_);
      if (j.type == JointType::Floating) {
        // x, y, z translations then yaw, pitch, roll rotations about the
        // moving axes, so R = Rz(yaw) Ry(pitch) Rx(roll) and
        // q = [x, y, z, roll, pitch, yaw].
        struct Sub {
          bool prismatic;
          Vec3 axis;
          int q_off;
        };
        const Sub subs[6] = {
            {true, Vec3::of(1, 0, 0), 0},  {true, Vec3::of(0, 1, 0), 1},
            {true, Vec3::of(0, 0, 1), 2},  {false, Vec3::of(0, 0, 1), 5},
            {false, Vec3::of(0, 1, 0), 4}, {false, Vec3::of(1, 0, 0), 3},
        };
        for (int s = 0; s < 6; ++s) {
          ChainElement e;
          e.prismatic = subs[s].prismatic;
          e.axis = subs[s].axis;
          e.q_index = nq_ + subs[s].q_off;
          e.parent = parent_chain;
          e.model_joint = static_cast<int>(ji);
          e.origin = (s == 0) ? origin : Pose::identity();
          e.link = (s == 5) ? j.child_link : -1;
          parent_chain = static_cast<int>(chain_.size());
          chain_.push_back(std::move(e));
        }
        nq_ += 6;
      } else {
        ChainElement e;
        e.prismatic = (j.type == JointType::Prismatic);
        e.axis = const_vec(j.axis);
        e.q_index = nq_++;
        e.parent = parent_chain;
        e.model_joint = static_cast<int>(ji);
        e.origin = origin;
        e.link = j.child_link;
        chain_.push_back(std::move(e));
      }
      link_to_chain_[j.child_link] = static_cast<int>(chain_.size()) - 1;
      done[ji] = true;
      --remaining;
      progress = true;
    }
    if (!progress) throw CycleError("joint graph is not a rooted tree");
  }
}

std::vector<Pose> Kinematics::frames(std::span<const Expr> q) const {
  if (static_cast<int>(q.size()) != nq_)
    throw ModelError("configuration dimension mismatch");
  std::vector<Pose> world;
  world.reserve(chain_.size());
  for (const ChainElement& e : chain_) {
    Pose joint = Pose::identity();
    const Expr& qi = q[e.q_index];
    if (e.prismatic)
      joint.p = e.axis * qi;
    else
      joint.R = axis_rotation(e.axis, qi);
    Pose local = e.origin * joint;
    world.push_back(e.parent < 0 ? local : world[e.parent] * local);
  }
  return world;
}

Pose Kinematics::link_pose(const std::vector<Pose>& frames, int link) const {
  return frames[link_to_chain_[link]];
}

Vec3 Kinematics::point_position(const std::vector<Pose>& frames, int link,
                                const Vec3& local) const {
  return link_pose(frames, link).apply(local);
}

std::array<std::vector<Expr>, 3> Kinematics::point_jacobian(
    const std::vector<Pose>& frames, int link, const Vec3& world_point) const {
  std::array<std::vector<Expr>, 3> J;
  for (auto& row : J) row.assign(static_cast<std::size_t>(nq_), Expr(0.0));
  int c = link_to_chain_[link];
  while (c >= 0) {
    const ChainElement& e = chain_[c];
    const Pose& X = frames[c];
    Vec3 axis_w = X.R * e.axis;
    Vec3 col = e.prismatic ? axis_w : cross(axis_w, world_point - X.p);
    J[0][e.q_index] = col.x;
    J[1][e.q_index] = col.y;
    J[2][e.q_index] = col.z;
    c = e.parent;
  }
  return J;
}

SpatialInertia Kinematics::link_inertia(int link) const {
  const Link& l = model_->links[link];
  Expr m = l.mass.expr(rho_);
  Vec3 c = param_vec(l.com, rho_);
  Mat3 I_com = Mat3::zero();
  switch (l.inertia_kind) {
    case InertiaKind::BoxFormula:
      I_com = box_inertia(m, l.extents[0].expr(rho_), l.extents[1].expr(rho_),
                          l.extents[2].expr(rho_));
      break;
    case InertiaKind::FixedDiag:
      I_com = Mat3::diag(Expr(l.fixed_diag[0]), Expr(l.fixed_diag[1]),
                         Expr(l.fixed_diag[2]));
      break;
    case InertiaKind::None:
      break;
  }
  return inertia_from_com(m, c, I_com);
}

std::vector<Pose> forward_kinematics(const Kinematics& kin,
                                     std::span<const Expr> q) {
  auto frames = kin.frames(q);
  std::vector<Pose> out;
  out.reserve(kin.model().links.size());
  for (std::size_t l = 0; l < kin.model().links.size(); ++l)
    out.push_back(kin.link_pose(frames, static_cast<int>(l)));
  return out;
}

namespace {

// Pose of chain element e relative to its parent element.
Pose element_pose(const ChainElement& e, const Expr& qi) {
  Pose joint = Pose::identity();
  if (e.prismatic)
    joint.p = e.axis * qi;
  else
    joint.R = axis_rotation(e.axis, qi);
  return e.origin * joint;
}

SpatialVec element_subspace(const ChainElement& e) {
  return e.prismatic ? SpatialVec{Vec3::zero(), e.axis}
                     : SpatialVec{e.axis, Vec3::zero()};
}

}  // namespace

std::vector<std::vector<Expr>> mass_matrix(const Kinematics& kin,
                                           std::span<const Expr> q) {
  const auto& chain = kin.chain();
  const int n = kin.nq();
  const int nc = static_cast<int>(chain.size());

  std::vector<Pose> X(nc);  // element pose in parent element frame
  std::vector<SpatialInertia> Ic(nc);
  for (int i = 0; i < nc; ++i) {
    X[i] = element_pose(chain[i], q[chain[i].q_index]);
    Ic[i] = chain[i].link >= 0 ? kin.link_inertia(chain[i].link)
                               : SpatialInertia::zero();
  }

  std::vector<std::vector<Expr>> H(n, std::vector<Expr>(n, Expr(0.0)));
  for (int i = nc - 1; i >= 0; --i) {
    const ChainElement& e = chain[i];
    if (e.parent >= 0) {
      SpatialInertia lifted = inertia_to_parent(X[i], Ic[i]);
      Ic[e.parent] = Ic[e.parent] + lifted;
    }
    SpatialVec S = element_subspace(e);
    SpatialVec F = Ic[i].apply(S);
    H[e.q_index][e.q_index] = dot(S, F);
    int j = i;
    while (chain[j].parent >= 0) {
      F = force_to_parent(X[j], F);
      j = chain[j].parent;
      Expr hij = dot(element_subspace(chain[j]), F);
      H[e.q_index][chain[j].q_index] = hij;
      H[chain[j].q_index][e.q_index] = hij;
    }
  }
  return H;
}

std::vector<Expr> inverse_dynamics(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> qd,
                                   std::span<const Expr> qdd,
                                   bool with_gravity) {
  const auto& chain = kin.chain();
  const int nc = static_cast<int>(chain.size());

  std::vector<Pose> X(nc);
  std::vector<SpatialVec> v(nc), a(nc), f(nc);
  // Gravity enters as a fictitious base acceleration of +g upward.
  SpatialVec a0 = SpatialVec::zero();
  if (with_gravity) a0.lin = Vec3::of(0, 0, kin.model().gravity);

  for (int i = 0; i < nc; ++i) {
    const ChainElement& e = chain[i];
    X[i] = element_pose(e, q[e.q_index]);
    SpatialVec S = element_subspace(e);
    SpatialVec vJ = S * qd[e.q_index];
    SpatialVec v_par = e.parent < 0 ? SpatialVec::zero() : v[e.parent];
    SpatialVec a_par = e.parent < 0 ? a0 : a[e.parent];
    v[i] = motion_to_child(X[i], v_par) + vJ;
    a[i] = motion_to_child(X[i], a_par) + S * qdd[e.q_index] +
           cross_motion(v[i], vJ);
    SpatialInertia I = e.link >= 0 ? kin.link_inertia(e.link)
                                   : SpatialInertia::zero();
    f[i] = I.apply(a[i]) + cross_force(v[i], I.apply(v[i]));
  }

  std::vector<Expr> tau(kin.nq(), Expr(0.0));
  for (int i = nc - 1; i >= 0; --i) {
    const ChainElement& e = chain[i];
    tau[e.q_index] = tau[e.q_index] + dot(element_subspace(e), f[i]);
    if (e.parent >= 0) f[e.parent] = f[e.parent] + force_to_parent(X[i], f[i]);
  }
  return tau;
}

std::vector<Expr> bias_forces(const Kinematics& kin, std::span<const Expr> q,
                              std::span<const Expr> qd, bool with_gravity) {
  std::vector<Expr> zero(kin.nq(), Expr(0.0));
  return inverse_dynamics(kin, q, qd, zero, with_gravity);
}

std::vector<ContactKinematics> contact_kinematics(
    const Kinematics& kin, const Terrain& terrain, std::span<const Expr> q,
    std::span<const Expr> qd, std::span<const double> cell_height_hint) {
  auto frames = kin.frames(q);
  std::vector<ContactKinematics> out;
  out.reserve(kin.model().contacts.size());
  for (std::size_t i = 0; i < kin.model().contacts.size(); ++i) {
    const ContactPoint& c = kin.model().contacts[i];
    Vec3 local = param_vec(c.offset, kin.rho());
    ContactKinematics ck;
    ck.world_point = kin.point_position(frames, c.link, local);
    double h = 0.0;
    if (terrain.kind == Terrain::Kind::Grid)
      h = i < cell_height_hint.size() ? cell_height_hint[i] : terrain.heights.at(0);
    ck.phi = ck.world_point.z - Expr(h);
    ck.jacobian = kin.point_jacobian(frames, c.link, ck.world_point);
    Expr vx(0.0), vy(0.0);
    for (int j = 0; j < kin.nq(); ++j) {
      vx += ck.jacobian[0][j] * qd[j];
      vy += ck.jacobian[1][j] * qd[j];
    }
    ck.psi_x = vx;  // terrain tangent frame is the world x/y plane
    ck.psi_y = vy;
    out.push_back(std::move(ck));
  }
  return out;
}

std::vector<Expr> actuation_forces(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> u) {
  const auto& model = kin.model();
  std::vector<Expr> tau(kin.nq(), Expr(0.0));
  std::vector<Pose> frames;  // built lazily, only thrusters need kinematics
  for (std::size_t a = 0; a < model.actuators.size(); ++a) {
    const Actuator& act = model.actuators[a];
    if (act.kind == ActuatorKind::JointTorque) {
      // Single-DOF joints map one torque onto one row of q.
      for (const ChainElement& e : kin.chain())
        if (e.model_joint == act.joint) tau[e.q_index] += u[a];
    } else {
      if (frames.empty()) frames = kin.frames(q);
      Vec3 local = param_vec(act.point, kin.rho());
      Vec3 p = kin.point_position(frames, act.link, local);
      Vec3 dir = kin.link_pose(frames, act.link).R * const_vec(act.direction);
      auto J = kin.point_jacobian(frames, act.link, p);
      for (int j = 0; j < kin.nq(); ++j)
        tau[j] += (J[0][j] * dir.x + J[1][j] * dir.y + J[2][j] * dir.z) * u[a];
    }
  }
  return tau;
}

std::vector<Expr> ldlt_solve(const std::vector<std::vector<Expr>>& A,
                             std::vector<Expr> b) {
  const int n = static_cast<int>(A.size());
  std::vector<std::vector<Expr>> L(n, std::vector<Expr>(n, Expr(0.0)));
  std::vector<Expr> D(n, Expr(0.0));
  for (int j = 0; j < n; ++j) {
    Expr d = A[j][j];
    for (int k = 0; k < j; ++k) d -= L[j][k] * L[j][k] * D[k];
    D[j] = d;
    for (int i = j + 1; i < n; ++i) {
      Expr v = A[i][j];
      for (int k = 0; k < j; ++k) v -= L[i][k] * L[j][k] * D[k];
      L[i][j] = v / D[j];
    }
  }
  // Forward substitution L y = b.
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < i; ++k) b[i] -= L[i][k] * b[k];
  // Diagonal.
  for (int i = 0; i < n; ++i) b[i] = b[i] / D[i];
  // Back substitution L^T x = y.
  for (int i = n - 1; i >= 0; --i)
    for (int k = i + 1; k < n; ++k) b[i] -= L[k][i] * b[k];
  return b;
}

std::vector<Expr> forward_dynamics(const Kinematics& kin,
                                   std::span<const Expr> q,
                                   std::span<const Expr> qd,
                                   std::span<const Expr> u,
                                   std::span<const Vec3> contact_lambda) {
  auto H = mass_matrix(kin, q);
  auto rhs = actuation_forces(kin, q, u);
  auto bias = bias_forces(kin, q, qd);
  for (int i = 0; i < kin.nq(); ++i) rhs[i] -= bias[i];

  if (!contact_lambda.empty()) {
    auto frames = kin.frames(q);
    for (std::size_t c = 0; c < kin.model().contacts.size(); ++c) {
      const ContactPoint& cp = kin.model().contacts[c];
      Vec3 local = param_vec(cp.offset, kin.rho());
      Vec3 p = kin.point_position(frames, cp.link, local);
      auto J = kin.point_jacobian(frames, cp.link, p);
      const Vec3& F = contact_lambda[c];
      for (int j = 0; j < kin.nq(); ++j)
        rhs[j] += J[0][j] * F.x + J[1][j] * F.y + J[2][j] * F.z;
    }
  }
  return ldlt_solve(H, std::move(rhs));
}

}  // namespace cotraj
