#pragma once

#include <iosfwd>
#include <map>

#include "cotraj/transcription.hpp"

namespace cotraj {

struct SolverOptions {
  int max_inner_iterations = 3000;  // per augmented-Lagrangian subproblem
  int max_outer_iterations = 40;
  int max_total_iterations = 150000;
  double constraint_tol = 1e-6;   // eps_c
  double optimality_tol = 1e-4;   // eps_o, projected-gradient norm
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e6;
  int lbfgs_memory = 20;
  double armijo_c = 1e-4;
  std::vector<double> slack_schedule = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4,
                                        3e-5,  1e-5, 3e-6, 1e-6};
  double slack_penalty = 0.01;  // phase-one linear weight on the slacks
  std::uint64_t seed = 0;
  int restart_budget = 10;
  std::ostream* log = nullptr;  // one line per accepted inner iteration
};

enum class SolveStatus { Optimal, Feasible, Infeasible, IterationLimit };
const char* status_name(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> x;
  double objective = 0;
  double max_violation = 0;
  std::map<std::string, double> family_violation;
  std::vector<double> multipliers;  // one per constraint row
  int iterations = 0;
  int restarts_used = 0;
  double wall_time = 0;
};

/// All NLP callbacks flattened onto one evaluation tape: objective,
/// constraint rows, and every structurally nonzero Jacobian entry come out
/// of a single pass. Immutable after construction; eval state is per call.
class CompiledNlp {
 public:
  explicit CompiledNlp(const NlpProblem& problem);

  int num_vars() const { return nvars_; }
  int num_cons() const { return ncons_; }
  std::size_t jacobian_nnz() const { return jac_.size(); }
  const std::vector<double>& row_lower() const { return lo_; }
  const std::vector<double>& row_upper() const { return hi_; }
  ConstraintFamily row_family(int i) const { return family_[i]; }

  void eval(std::span<const double> x, std::vector<double>& values) const;
  /// Objective and constraint rows only; skips the Jacobian entries.
  void eval_values(std::span<const double> x, std::vector<double>& values) const;
  double objective(const std::vector<double>& values) const { return values[0]; }
  std::span<const double> constraints(const std::vector<double>& values) const {
    return {values.data() + 1, static_cast<std::size_t>(ncons_)};
  }
  /// g += w * grad f
  void add_objective_gradient(const std::vector<double>& values, double w,
                              std::span<double> g) const;
  /// g += J^T w
  void add_jacobian_transpose(const std::vector<double>& values,
                              std::span<const double> w,
                              std::span<double> g) const;

 private:
  struct Entry {
    int row, col, slot;
  };
  Tape tape_;       // objective, rows, and Jacobian entries
  Tape tape_vals_;  // objective and rows only, for line-search probes
  int nvars_ = 0, ncons_ = 0;
  std::vector<double> lo_, hi_;
  std::vector<ConstraintFamily> family_;
  std::vector<Entry> obj_grad_;  // row is unused
  std::vector<Entry> jac_;
};

enum class SolvePhase { Feasibility, Cost };

/// One augmented-Lagrangian solve. Feasibility phase ignores the objective
/// and drives constraint violation below eps_c; cost phase minimizes the
/// objective from a feasible start.
SolveResult solve_nlp(const NlpProblem& problem, const CompiledNlp& compiled,
                      std::vector<double> x0, const SolverOptions& opts,
                      SolvePhase phase,
                      std::vector<double>* warm_multipliers = nullptr);

/// Two-phase driver: feasibility over the decreasing slack schedule, then
/// cost, with random actuation restarts on failure. Mutates the problem's
/// slack bounds.
SolveResult co_optimize(NlpProblem& problem, const CompiledNlp& compiled,
                        std::vector<double> x0, const SolverOptions& opts);

/// Per-family max constraint violation at x, by direct expression
/// evaluation (no compiled tape needed).
std::map<std::string, double> evaluate_violations(const NlpProblem& problem,
                                                  std::span<const double> x);

struct KktReport {
  double stationarity = 0;
  double primal_feasibility = 0;
  double dual_feasibility = 0;
  double complementarity = 0;
};

/// Standard KKT measures with convention L = f - nu^T c and nu >= 0 on
/// active lower bounds (<= 0 on active upper bounds).
KktReport kkt_residual(const NlpProblem& problem, const CompiledNlp& compiled,
                       std::span<const double> x,
                       std::span<const double> nu);

}  // namespace cotraj
