#include "cotraj/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cotraj {

const char* family_name(ConstraintFamily f) {
  switch (f) {
    case ConstraintFamily::Dynamics: return "dynamics";
    case ConstraintFamily::Contact: return "contact";
    case ConstraintFamily::Task: return "task";
    case ConstraintFamily::Parametric: return "parametric";
    case ConstraintFamily::Design: return "design";
    case ConstraintFamily::Epigraph: return "epigraph";
  }
  return "?";
}

int NlpProblem::num_constraints() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.exprs.size());
  return n;
}

void NlpProblem::set_slack_limit(double s) {
  for (int i : slack_indices) upper[i] = s;
}

double uniform_draw(std::uint64_t bits, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(bits >> 11) * 0x1.0p-53);
}

namespace {

std::vector<std::vector<double>> interpolate_keyframes(const TaskSpec& task,
                                                       int K, int n) {
  std::vector<Keyframe> kfs = task.keyframes;
  std::sort(kfs.begin(), kfs.end(),
            [](const Keyframe& a, const Keyframe& b) { return a.knot < b.knot; });
  for (const auto& kf : kfs)
    if (static_cast<int>(kf.q.size()) != n)
      throw BadKeyframe("keyframe dimension mismatch");

  std::vector<std::vector<double>> q(K, std::vector<double>(n, 0.0));
  for (int k = 0; k < K; ++k) {
    if (k <= kfs.front().knot) {
      q[k] = kfs.front().q;
      continue;
    }
    if (k >= kfs.back().knot) {
      q[k] = kfs.back().q;
      continue;
    }
    size_t j = 1;
    while (kfs[j].knot < k) ++j;
    const Keyframe& a = kfs[j - 1];
    const Keyframe& b = kfs[j];
    double t = static_cast<double>(k - a.knot) / (b.knot - a.knot);
    for (int i = 0; i < n; ++i) q[k][i] = (1 - t) * a.q[i] + t * b.q[i];
  }
  return q;
}

struct Builder {
  const RobotModel& robot;
  const TaskSpec& task;
  const MotorLibrary* motors;
  BuildOptions opts;
  NlpProblem nlp;
  std::vector<Expr> vars;
  std::vector<double> guess_point;  // q and rho filled in, for cell hints

  ConstraintBlock& block(ConstraintFamily fam, std::string label) {
    ConstraintBlock b;
    b.family = fam;
    b.label = std::move(label);
    nlp.blocks.push_back(std::move(b));
    return nlp.blocks.back();
  }

  static void add_row(ConstraintBlock& b, Expr e, double lo, double hi) {
    b.exprs.push_back(std::move(e));
    b.lower.push_back(lo);
    b.upper.push_back(hi);
  }

  std::vector<Expr> slice(int base, int count) const {
    std::vector<Expr> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(vars[base + i]);
    return out;
  }

  double guessed_height(const Kinematics& kin, int link, const Vec3& local,
                        int knot) const {
    if (task.terrain.kind == Terrain::Kind::Flat) return 0.0;
    // Cell membership is frozen at the interpolated initial guess; the
    // height enters the constraint graph as a constant.
    auto frames = kin.frames(slice(nlp.layout.q_index(knot, 0), nlp.layout.n));
    Vec3 wp = kin.point_position(frames, link, local);
    double x = evaluate1(wp.x, guess_point);
    double y = evaluate1(wp.y, guess_point);
    return task.terrain.height_at(x, y);
  }

  void build();
};

void Builder::build() {
  const int K = opts.knots > 0 ? opts.knots : task.knots;
  const double T = opts.duration > 0 ? opts.duration : task.duration_max;
  if (K < 2) throw ModelError("need at least 2 knots");

  ObjectiveSpec obj = task.objective;
  if (opts.alpha >= 0) obj.alpha = opts.alpha;
  if (opts.beta >= 0) obj.beta = opts.beta;
  if (opts.mode_set) obj.mode = opts.mode;

  DecisionLayout& lay = nlp.layout;
  lay.K = K;
  lay.n = robot.nq();
  lay.m = robot.num_actuators();
  lay.l = robot.num_contacts();
  lay.p = robot.num_params();
  const int N = lay.total();

  nlp.objective_spec = obj;
  nlp.duration = T;
  nlp.slack_initial = opts.slack_initial;
  nlp.contact_tol = opts.contact_tol;
  nlp.rho0 = robot.initial_params();
  nlp.total_weight = robot.total_mass(nlp.rho0) * robot.gravity;
  nlp.guess_q = interpolate_keyframes(task, K, lay.n);

  vars.reserve(N);
  for (int i = 0; i < N; ++i) vars.push_back(Expr::variable(i));
  nlp.lower.assign(N, -kInfinity);
  nlp.upper.assign(N, kInfinity);

  // Actuation limits: per-actuator limit if declared, else the largest
  // motor's rating.
  double max_u = 0;
  for (int j = 0; j < lay.m; ++j) {
    double lim = robot.actuators[j].limit;
    if (lim <= 0) {
      if (!motors)
        throw ModelError("actuator '" + robot.actuators[j].name +
                         "' has no limit and no motor library was given");
      lim = motors->max_torque();
    }
    nlp.u_limits.push_back(lim);
    max_u = std::max(max_u, lim);
    for (int k = 0; k < K; ++k) {
      nlp.lower[lay.u_index(k, j)] = -lim;
      nlp.upper[lay.u_index(k, j)] = lim;
    }
  }

  for (int k = 0; k < K; ++k)
    for (int c = 0; c < lay.l; ++c)
      for (int comp = 0; comp < 6; ++comp)
        nlp.lower[lay.lambda_index(k, c, comp)] = 0.0;

  for (int k = 0; k + 1 < K; ++k) {
    for (int c = 0; c < lay.l; ++c)
      for (int s = 0; s < 5; ++s) {
        int idx = lay.slack_index(k, c, s);
        nlp.lower[idx] = 0.0;
        nlp.upper[idx] = opts.slack_initial;
        nlp.slack_indices.push_back(idx);
      }
    double dt0 = T / (K - 1);
    double flo = opts.dt_lower_factor >= 0 ? opts.dt_lower_factor
                                           : task.dt_min_factor;
    double fhi = opts.dt_upper_factor >= 0 ? opts.dt_upper_factor
                                           : task.dt_max_factor;
    nlp.lower[lay.dt_index(k)] = flo * dt0;
    nlp.upper[lay.dt_index(k)] = fhi * dt0;
  }

  for (int i = 0; i < lay.p; ++i) {
    nlp.lower[lay.rho_index(i)] = robot.params[i].lower;
    nlp.upper[lay.rho_index(i)] = robot.params[i].upper;
  }
  nlp.lower[lay.xi_index()] = 0.0;
  nlp.upper[lay.xi_index()] = max_u > 0 ? max_u : kInfinity;

  // Point for numeric probes of the interpolated guess (q and rho only).
  guess_point.assign(N, 0.0);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < lay.n; ++i)
      guess_point[lay.q_index(k, i)] = nlp.guess_q[k][i];
  for (int i = 0; i < lay.p; ++i)
    guess_point[lay.rho_index(i)] = nlp.rho0[i];

  std::vector<Expr> rho = slice(lay.rho_index(0), lay.p);
  Expr xi = vars[lay.xi_index()];
  Kinematics kin(robot, rho);

  // Dynamics defects, one block per interval. The acceleration rows are
  // scaled through the mass matrix, H (qd' - qd) = rhs dt, which is
  // algebraically equivalent to the integration step but keeps the
  // constraint graph polynomial in the kinematic quantities.
  for (int k = 0; k + 1 < K; ++k) {
    const int e = opts.implicit_euler ? k + 1 : k;
    std::vector<Expr> q_e = slice(lay.q_index(e, 0), lay.n);
    std::vector<Expr> qd_e = slice(lay.qd_index(e, 0), lay.n);
    std::vector<Expr> u_k = slice(lay.u_index(k, 0), lay.m);
    Expr dt = vars[lay.dt_index(k)];

    auto H = mass_matrix(kin, q_e);
    auto bias = bias_forces(kin, q_e, qd_e);
    auto Bu = actuation_forces(kin, q_e, u_k);

    std::vector<Expr> rhs(lay.n, Expr(0.0));
    for (int i = 0; i < lay.n; ++i) rhs[i] = Bu[i] - bias[i];

    if (lay.l > 0) {
      std::vector<double> hints(lay.l);
      for (int c = 0; c < lay.l; ++c) {
        Vec3 local(robot.contacts[c].offset[0].expr(rho),
                   robot.contacts[c].offset[1].expr(rho),
                   robot.contacts[c].offset[2].expr(rho));
        hints[c] = guessed_height(kin, robot.contacts[c].link, local, e);
      }
      auto cks = contact_kinematics(kin, task.terrain, q_e, qd_e, hints);
      for (int c = 0; c < lay.l; ++c) {
        Expr fx = vars[lay.lambda_index(k, c, 1)] - vars[lay.lambda_index(k, c, 2)];
        Expr fy = vars[lay.lambda_index(k, c, 3)] - vars[lay.lambda_index(k, c, 4)];
        Expr fz = vars[lay.lambda_index(k, c, 0)];
        for (int i = 0; i < lay.n; ++i)
          rhs[i] = rhs[i] + cks[c].jacobian[0][i] * fx +
                   cks[c].jacobian[1][i] * fy + cks[c].jacobian[2][i] * fz;
      }
    }

    ConstraintBlock& b =
        block(ConstraintFamily::Dynamics, "defect[" + std::to_string(k) + "]");
    for (int i = 0; i < lay.n; ++i)
      add_row(b,
              vars[lay.q_index(k + 1, i)] - vars[lay.q_index(k, i)] -
                  qd_e[i] * dt,
              0.0, 0.0);
    for (int i = 0; i < lay.n; ++i) {
      Expr row(0.0);
      for (int j = 0; j < lay.n; ++j)
        row = row + H[i][j] * (vars[lay.qd_index(k + 1, j)] -
                               vars[lay.qd_index(k, j)]);
      add_row(b, row - rhs[i] * dt, 0.0, 0.0);
    }
  }

  // Contact feasibility and relaxed complementarity at every knot. Knot k's
  // products use interval min(k, K-2)'s slacks.
  nlp.contact_phi.assign(K, {});
  if (lay.l > 0) {
    const double mu = task.terrain.mu;
    for (int k = 0; k < K; ++k) {
      std::vector<Expr> q_k = slice(lay.q_index(k, 0), lay.n);
      std::vector<Expr> qd_k = slice(lay.qd_index(k, 0), lay.n);
      std::vector<double> hints(lay.l);
      for (int c = 0; c < lay.l; ++c) {
        Vec3 local(robot.contacts[c].offset[0].expr(rho),
                   robot.contacts[c].offset[1].expr(rho),
                   robot.contacts[c].offset[2].expr(rho));
        hints[c] = guessed_height(kin, robot.contacts[c].link, local, k);
      }
      auto cks = contact_kinematics(kin, task.terrain, q_k, qd_k, hints);
      const int si = std::min(k, K - 2);
      ConstraintBlock& b =
          block(ConstraintFamily::Contact, "contact[" + std::to_string(k) + "]");
      for (int c = 0; c < lay.l; ++c) {
        nlp.contact_phi[k].push_back(cks[c].phi);
        Expr lz = vars[lay.lambda_index(k, c, 0)];
        Expr lxp = vars[lay.lambda_index(k, c, 1)];
        Expr lxm = vars[lay.lambda_index(k, c, 2)];
        Expr lyp = vars[lay.lambda_index(k, c, 3)];
        Expr lym = vars[lay.lambda_index(k, c, 4)];
        Expr gam = vars[lay.lambda_index(k, c, 5)];
        Expr cone = Expr(mu) * lz - lxp - lxm - lyp - lym;
        Expr sxp = gam + cks[c].psi_x;
        Expr sxm = gam - cks[c].psi_x;
        Expr syp = gam + cks[c].psi_y;
        Expr sym = gam - cks[c].psi_y;

        add_row(b, cks[c].phi, 0.0, kInfinity);
        add_row(b, cone, 0.0, kInfinity);
        add_row(b, sxp, 0.0, kInfinity);
        add_row(b, sxm, 0.0, kInfinity);
        add_row(b, syp, 0.0, kInfinity);
        add_row(b, sym, 0.0, kInfinity);

        // Six complementarity products against five slacks; the cone-gamma
        // product shares the first slack with the distance-force product.
        const Expr s1 = vars[lay.slack_index(si, c, 0)];
        const Expr s2 = vars[lay.slack_index(si, c, 1)];
        const Expr s3 = vars[lay.slack_index(si, c, 2)];
        const Expr s4 = vars[lay.slack_index(si, c, 3)];
        const Expr s5 = vars[lay.slack_index(si, c, 4)];
        // Only the upper side is posed: the factors' own sign constraints
        // already bound the product from below, and a product row scaled by
        // a stance force would demand far tighter accuracy than either
        // factor's row.
        auto product = [&](Expr prod, const Expr& s) {
          add_row(b, prod - s, -kInfinity, 0.0);
        };
        product(cks[c].phi * lz, s1);
        product(cone * gam, s1);
        product(sxp * lxp, s2);
        product(sxm * lxm, s3);
        product(syp * lyp, s4);
        product(sym * lym, s5);
      }
    }

    // Boxy links without their own contact points must clear the terrain:
    // all eight box corners stay above ground at every knot.
    for (size_t li = 0; li < robot.links.size(); ++li) {
      const Link& link = robot.links[li];
      if (!link.has_box) continue;
      bool has_contact = false;
      for (const auto& c : robot.contacts)
        if (c.link == static_cast<int>(li)) has_contact = true;
      if (has_contact) continue;
      ConstraintBlock& b =
          block(ConstraintFamily::Contact, "clearance[" + link.name + "]");
      for (int k = 0; k < K; ++k) {
        std::vector<Expr> q_k = slice(lay.q_index(k, 0), lay.n);
        auto frames = kin.frames(q_k);
        for (int corner = 0; corner < 8; ++corner) {
          Vec3 local(
              link.com[0].expr(rho) + Expr(corner & 1 ? 0.5 : -0.5) *
                                          link.extents[0].expr(rho),
              link.com[1].expr(rho) + Expr(corner & 2 ? 0.5 : -0.5) *
                                          link.extents[1].expr(rho),
              link.com[2].expr(rho) + Expr(corner & 4 ? 0.5 : -0.5) *
                                          link.extents[2].expr(rho));
          Vec3 wp = kin.point_position(frames, static_cast<int>(li), local);
          double h = 0.0;
          if (task.terrain.kind == Terrain::Kind::Grid) {
            double x = evaluate1(wp.x, guess_point);
            double y = evaluate1(wp.y, guess_point);
            h = task.terrain.height_at(x, y);
          }
          add_row(b, wp.z - Expr(h), 0.0, kInfinity);
        }
      }
    }
  }

  // Task constraints.
  for (size_t ti = 0; ti < task.constraints.size(); ++ti) {
    const TaskConstraint& tc = task.constraints[ti];
    ConstraintBlock& b =
        block(ConstraintFamily::Task, "task[" + std::to_string(ti) + "]");
    for (int k : tc.knots) {
      switch (tc.kind) {
        case TaskConstraint::Kind::ConfigEquality:
          for (size_t i = 0; i < tc.dofs.size(); ++i) {
            int idx = lay.q_index(k, tc.dofs[i]);
            add_row(b, vars[idx], tc.values[i], tc.values[i]);
            // Single-variable equalities double as variable bounds so the
            // inner solver keeps them exact instead of chasing multipliers.
            nlp.lower[idx] = nlp.upper[idx] = tc.values[i];
          }
          break;
        case TaskConstraint::Kind::DofVelocity:
          for (size_t i = 0; i < tc.dofs.size(); ++i) {
            int idx = lay.qd_index(k, tc.dofs[i]);
            add_row(b, vars[idx], tc.values[i], tc.values[i]);
            nlp.lower[idx] = nlp.upper[idx] = tc.values[i];
          }
          break;
        case TaskConstraint::Kind::PointPosition: {
          std::vector<Expr> q_k = slice(lay.q_index(k, 0), lay.n);
          auto frames = kin.frames(q_k);
          Vec3 local(tc.local_point[0], tc.local_point[1], tc.local_point[2]);
          Vec3 wp = kin.point_position(frames, tc.link, local);
          const Expr* axes[3] = {&wp.x, &wp.y, &wp.z};
          for (int a = 0; a < 3; ++a)
            if (tc.axis_active[a])
              add_row(b, *axes[a], tc.lower[a], tc.upper[a]);
          break;
        }
        case TaskConstraint::Kind::ComHeightWindow: {
          std::vector<Expr> q_k = slice(lay.q_index(k, 0), lay.n);
          auto frames = kin.frames(q_k);
          Expr weighted(0.0), total(0.0);
          for (size_t li = 0; li < robot.links.size(); ++li) {
            Expr m = robot.links[li].mass.expr(rho);
            Vec3 com(robot.links[li].com[0].expr(rho),
                     robot.links[li].com[1].expr(rho),
                     robot.links[li].com[2].expr(rho));
            Vec3 wp = kin.point_position(frames, static_cast<int>(li), com);
            weighted = weighted + m * wp.z;
            total = total + m;
          }
          add_row(b, weighted / total, tc.lower[2], tc.upper[2]);
          break;
        }
      }
    }
  }

  // Parameter box, mirrored as rows so audits report the family directly.
  if (lay.p > 0) {
    ConstraintBlock& b = block(ConstraintFamily::Parametric, "rho bounds");
    for (int i = 0; i < lay.p; ++i)
      add_row(b, rho[i], robot.params[i].lower, robot.params[i].upper);
  }

  // Fabrication couplings against the conservative motor bound curves.
  if (!robot.couplings.empty()) {
    if (!motors)
      throw ModelError("robot declares couplings but no motor library given");
    ConstraintBlock& b = block(ConstraintFamily::Design, "couplings");
    for (const Coupling& c : robot.couplings) {
      const BoundCurve* curve = nullptr;
      switch (c.curve) {
        case Coupling::Curve::Mass: curve = &motors->mass_bound(); break;
        case Coupling::Curve::X: curve = &motors->extent_x_bound(); break;
        case Coupling::Curve::Y: curve = &motors->extent_y_bound(); break;
        case Coupling::Curve::Z: curve = &motors->extent_z_bound(); break;
      }
      Expr bound = Expr(c.multiplier) * (*curve)(xi) + Expr(c.offset);
      if (c.add_structural_mass) bound = bound + Expr(robot.structural_mass);
      add_row(b, rho[c.param] - bound, 0.0, kInfinity);
    }
  }

  // Epigraph rows for the torque bound, xi >= |u| everywhere.
  if (lay.m > 0) {
    ConstraintBlock& b = block(ConstraintFamily::Epigraph, "xi bound");
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < lay.m; ++j) {
        add_row(b, xi - vars[lay.u_index(k, j)], 0.0, kInfinity);
        add_row(b, xi + vars[lay.u_index(k, j)], 0.0, kInfinity);
      }
  }

  if (obj.mode == ObjectiveSpec::Mode::Actuation) {
    Expr reg(0.0);
    for (int i = 0; i < lay.p; ++i) {
      Expr d = rho[i] - Expr(nlp.rho0[i]);
      reg = reg + Expr(0.5) * d * d;
    }
    nlp.objective = Expr(obj.alpha) * xi + Expr(obj.beta) * reg;
  } else {
    Expr sum(0.0);
    for (int k = 0; k + 1 < K; ++k) sum = sum + vars[lay.dt_index(k)];
    nlp.objective = sum;
  }
}

}  // namespace

NlpProblem build_nlp(const RobotModel& robot, const TaskSpec& task,
                     const MotorLibrary* motors, const BuildOptions& opts) {
  robot.validate();
  Builder b{robot, task, motors, opts, {}, {}, {}};
  b.build();
  return std::move(b.nlp);
}

std::vector<double> initialize_guess(const NlpProblem& nlp, uint64_t seed) {
  const DecisionLayout& lay = nlp.layout;
  std::vector<double> x(lay.total(), 0.0);

  for (int k = 0; k < lay.K; ++k)
    for (int i = 0; i < lay.n; ++i)
      x[lay.q_index(k, i)] = nlp.guess_q[k][i];

  const double dt0 = nlp.duration / (lay.K - 1);
  for (int k = 0; k + 1 < lay.K; ++k) x[lay.dt_index(k)] = dt0;
  for (int i = 0; i < lay.p; ++i) x[lay.rho_index(i)] = nlp.rho0[i];
  for (int idx : nlp.slack_indices) x[idx] = nlp.slack_initial;

  std::mt19937_64 rng(seed);
  double xi = 0;
  for (int k = 0; k < lay.K; ++k)
    for (int j = 0; j < lay.m; ++j) {
      double lim = nlp.u_limits[j];
      double u = uniform_draw(rng(), -lim, lim);
      x[lay.u_index(k, j)] = u;
      xi = std::max(xi, std::abs(u));
    }
  x[lay.xi_index()] = xi;

  // Contacts start loaded with the robot's weight wherever the
  // interpolated pose already touches down.
  for (int k = 0; k < lay.K && lay.l > 0; ++k)
    for (int c = 0; c < lay.l; ++c) {
      double phi = evaluate1(nlp.contact_phi[k][c], x);
      if (phi <= nlp.contact_tol)
        x[lay.lambda_index(k, c, 0)] = nlp.total_weight;
    }

  return x;
}

}  // namespace cotraj
