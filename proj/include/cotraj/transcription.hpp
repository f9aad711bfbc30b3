#pragma once

#include <string>
#include <vector>

#include "cotraj/dynamics.hpp"
#include "cotraj/motors.hpp"
#include "cotraj/task.hpp"

namespace cotraj {

/// Index map over the flat decision vector. Per knot: q, qd, u, lambda
/// (6 components per contact: lambda_z, lambda_x+, lambda_x-, lambda_y+,
/// lambda_y-, gamma). Per interval: 5 complementarity slacks per contact,
/// then dt. Then the p design parameters and the torque bound xi.
struct DecisionLayout {
  int K = 0, n = 0, m = 0, l = 0, p = 0;

  int knot_stride() const { return 2 * n + m + 6 * l; }
  int interval_stride() const { return 5 * l + 1; }
  int interval_base() const { return knot_stride() * K; }

  int q_index(int k, int i) const { return knot_stride() * k + i; }
  int qd_index(int k, int i) const { return knot_stride() * k + n + i; }
  int u_index(int k, int j) const { return knot_stride() * k + 2 * n + j; }
  int lambda_index(int k, int c, int comp) const {
    return knot_stride() * k + 2 * n + m + 6 * c + comp;
  }
  int slack_index(int k, int c, int s) const {
    return interval_base() + interval_stride() * k + 5 * c + s;
  }
  int dt_index(int k) const {
    return interval_base() + interval_stride() * k + 5 * l;
  }
  int rho_index(int i) const {
    return interval_base() + interval_stride() * (K - 1) + i;
  }
  int xi_index() const { return rho_index(p); }
  int total() const { return xi_index() + 1; }
};

enum class ConstraintFamily { Dynamics, Contact, Task, Parametric, Design, Epigraph };

const char* family_name(ConstraintFamily f);

/// A group of scalar constraints lower <= expr <= upper sharing one family
/// tag. Equalities have lower == upper; one-sided rows use +-kInfinity.
struct ConstraintBlock {
  ConstraintFamily family = ConstraintFamily::Task;
  std::string label;
  std::vector<Expr> exprs;
  std::vector<double> lower, upper;
};

inline constexpr double kInfinity = 1e30;

struct BuildOptions {
  int knots = 0;          // 0: take from the task spec
  double duration = 0;    // 0: take from the task spec
  double alpha = -1;      // <0: take from the task spec
  double beta = -1;
  ObjectiveSpec::Mode mode = ObjectiveSpec::Mode::Actuation;
  bool mode_set = false;
  bool implicit_euler = false;  // evaluate dynamics at knot k+1 instead of k
  double slack_initial = 1e-2;
  double contact_tol = 1e-3;    // initialization contact detection
  double dt_lower_factor = -1, dt_upper_factor = -1;  // <0: from the task
};

struct NlpProblem {
  DecisionLayout layout;
  std::vector<double> lower, upper;  // variable bounds
  std::vector<ConstraintBlock> blocks;
  Expr objective;
  ObjectiveSpec objective_spec;
  double duration = 0;

  std::vector<int> slack_indices;
  std::vector<double> u_limits;                // per actuator, magnitude
  std::vector<std::vector<Expr>> contact_phi;  // [K][l], for initialization
  std::vector<double> rho0;
  double total_weight = 0;  // at rho0, Newtons
  double slack_initial = 1e-2;
  double contact_tol = 1e-3;
  std::vector<std::vector<double>> guess_q;  // keyframe interpolation, [K][n]

  int num_constraints() const;
  void set_slack_limit(double s);
};

NlpProblem build_nlp(const RobotModel& robot, const TaskSpec& task,
                     const MotorLibrary* motors,
                     const BuildOptions& opts = {});

/// Full initial decision vector: interpolated q, zero qd, even knot spacing,
/// weight-on-contact normal forces, uniform random u, rho at its anchor,
/// xi at max |u|, slacks at the initial relaxation.
std::vector<double> initialize_guess(const NlpProblem& problem, uint64_t seed);

/// Deterministic uniform draw on [lo, hi) from 53 random mantissa bits.
double uniform_draw(std::uint64_t bits, double lo, double hi);

}  // namespace cotraj
