#include "cotraj/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace cotraj {

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

CompiledNlp::CompiledNlp(const NlpProblem& p) {
  nvars_ = p.layout.total();
  std::vector<Expr> exprs;
  exprs.push_back(p.objective);
  for (const auto& b : p.blocks)
    for (std::size_t i = 0; i < b.exprs.size(); ++i) {
      exprs.push_back(b.exprs[i]);
      lo_.push_back(b.lower[i]);
      hi_.push_back(b.upper[i]);
      family_.push_back(b.family);
    }
  ncons_ = static_cast<int>(exprs.size()) - 1;

  std::vector<int> wrt(nvars_);
  std::iota(wrt.begin(), wrt.end(), 0);
  SparseJacobian jac = differentiate(exprs, wrt);

  std::vector<Expr> outs = exprs;
  for (const auto& e : jac.entries) {
    Entry ent{e.row - 1, e.col, static_cast<int>(outs.size())};
    outs.push_back(e.value);
    if (e.row == 0)
      obj_grad_.push_back(ent);
    else
      jac_.push_back(ent);
  }
  tape_ = compile(outs);
  tape_vals_ = compile(exprs);
}

void CompiledNlp::eval(std::span<const double> x,
                       std::vector<double>& values) const {
  values.resize(tape_.output_arity());
  thread_local std::vector<double> scratch;
  tape_.evaluate(x, values, scratch);
}

void CompiledNlp::eval_values(std::span<const double> x,
                              std::vector<double>& values) const {
  values.resize(tape_vals_.output_arity());
  thread_local std::vector<double> scratch;
  tape_vals_.evaluate(x, values, scratch);
}

void CompiledNlp::add_objective_gradient(const std::vector<double>& values,
                                         double w, std::span<double> g) const {
  if (w == 0) return;
  for (const Entry& e : obj_grad_) g[e.col] += w * values[e.slot];
}

void CompiledNlp::add_jacobian_transpose(const std::vector<double>& values,
                                         std::span<const double> w,
                                         std::span<double> g) const {
  for (const Entry& e : jac_) {
    double wi = w[e.row];
    if (wi != 0) g[e.col] += wi * values[e.slot];
  }
}

namespace {

double row_dist(double c, double lo, double hi) {
  if (c < lo) return lo - c;
  if (c > hi) return c - hi;
  return 0.0;
}

double clampd(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

/// Augmented-Lagrangian merit at one point: value, gradient, objective,
/// violation, and the first-order multiplier estimates.
struct MeritPoint {
  double phi = std::numeric_limits<double>::infinity();
  double objective = 0;
  double violation = 0;
  std::vector<double> grad;
  std::vector<double> w;  // mu * shifted residual, one per row
  bool finite = false;
};

struct MeritFn {
  const CompiledNlp& f;
  const std::vector<double>& xlo;
  const std::vector<double>& xhi;
  const std::vector<double>* lam;
  double mu = 1;
  double fweight = 0;
  // Phase one drives the relaxation down ahead of the bound: a linear charge
  // on the slack variables.
  const std::vector<int>* slack_indices = nullptr;
  double slack_weight = 0;
  mutable std::vector<double> values;

  MeritPoint operator()(std::span<const double> x, bool need_grad = true) const {
    MeritPoint out;
    try {
      if (need_grad)
        f.eval(x, values);
      else
        f.eval_values(x, values);
    } catch (const EvalError&) {
      return out;  // infinite merit, rejected by the line search
    }
    const auto c = f.constraints(values);
    const auto& lo = f.row_lower();
    const auto& hi = f.row_upper();
    out.objective = f.objective(values);
    out.phi = fweight * out.objective;
    out.w.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      double y = c[i] + (*lam)[i] / mu;
      double r = y - clampd(y, lo[i], hi[i]);
      out.phi += 0.5 * mu * r * r;
      out.w[i] = mu * r;
      out.violation = std::max(out.violation, row_dist(c[i], lo[i], hi[i]));
    }
    if (slack_weight > 0 && slack_indices)
      for (int i : *slack_indices) out.phi += slack_weight * x[i];
    if (need_grad) {
      out.grad.assign(x.size(), 0.0);
      f.add_objective_gradient(values, fweight, out.grad);
      f.add_jacobian_transpose(values, out.w, out.grad);
      if (slack_weight > 0 && slack_indices)
        for (int i : *slack_indices) out.grad[i] += slack_weight;
    }
    out.finite = std::isfinite(out.phi);
    if (!out.finite) out.phi = std::numeric_limits<double>::infinity();
    return out;
  }
};

double projected_gradient_norm(std::span<const double> x,
                               std::span<const double> g,
                               std::span<const double> lo,
                               std::span<const double> hi) {
  double norm = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double step = clampd(x[i] - g[i], lo[i], hi[i]) - x[i];
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

struct LbfgsMemory {
  int capacity = 10;
  std::deque<std::vector<double>> s, y;
  std::deque<double> rho;

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }
  void push(std::vector<double> si, std::vector<double> yi) {
    double sy = std::inner_product(si.begin(), si.end(), yi.begin(), 0.0);
    double ss = std::inner_product(si.begin(), si.end(), si.begin(), 0.0);
    double yy = std::inner_product(yi.begin(), yi.end(), yi.begin(), 0.0);
    if (!(sy > 1e-10 * std::sqrt(ss * yy))) return;
    s.push_back(std::move(si));
    y.push_back(std::move(yi));
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }
  // Two-loop recursion, d = -H g.
  std::vector<double> direction(std::span<const double> g) const {
    std::vector<double> q(g.begin(), g.end());
    const int k = static_cast<int>(s.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho[i] *
                 std::inner_product(s[i].begin(), s[i].end(), q.begin(), 0.0);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y[i][j];
    }
    if (k > 0) {
      double sy = 1.0 / rho[k - 1];
      double yy = std::inner_product(y[k - 1].begin(), y[k - 1].end(),
                                     y[k - 1].begin(), 0.0);
      double gamma = sy / yy;
      for (double& v : q) v *= gamma;
    }
    for (int i = 0; i < k; ++i) {
      double beta = rho[i] *
                    std::inner_product(y[i].begin(), y[i].end(), q.begin(), 0.0);
      for (std::size_t j = 0; j < q.size(); ++j)
        q[j] += (alpha[i] - beta) * s[i][j];
    }
    for (double& v : q) v = -v;
    return q;
  }
};

struct InnerOutcome {
  MeritPoint point;
  int iterations = 0;
  double pg_norm = 0;
};

/// Projected L-BFGS with Armijo backtracking on the merit function.
InnerOutcome minimize_inner(const MeritFn& merit, std::vector<double>& x,
                            double tol, int max_iter,
                            const SolverOptions& opts, const char* tag,
                            int iter_offset) {
  const auto& xlo = merit.xlo;
  const auto& xhi = merit.xhi;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) x[i] = clampd(x[i], xlo[i], xhi[i]);

  LbfgsMemory mem;
  mem.capacity = opts.lbfgs_memory;
  MeritPoint cur = merit(x);
  if (!cur.finite)
    throw NonFiniteResult("merit function non-finite at the start point");

  InnerOutcome out;
  std::vector<double> xt(n);
  int no_progress = 0;

  // Gradient restricted to the free subspace: components blocked by an
  // active bound are zeroed so the curvature pairs stay consistent.
  auto reduce = [&](const std::vector<double>& xp, const std::vector<double>& g) {
    std::vector<double> gr = g;
    for (std::size_t i = 0; i < n; ++i) {
      double span = 1e-10 * (1.0 + std::abs(xp[i]));
      bool at_lo = xp[i] - xlo[i] <= span;
      bool at_hi = xhi[i] - xp[i] <= span;
      if ((at_lo && gr[i] > 0) || (at_hi && gr[i] < 0)) gr[i] = 0;
    }
    return gr;
  };

  std::vector<double> gr = reduce(x, cur.grad);
  for (int it = 0; it < max_iter; ++it) {
    out.pg_norm = projected_gradient_norm(x, cur.grad, xlo, xhi);
    if (out.pg_norm <= tol) break;

    std::vector<double> d = mem.direction(gr);
    bool steepest = mem.s.empty();
    for (std::size_t i = 0; i < n; ++i)
      if (gr[i] == 0) d[i] = 0;
    double gd = std::inner_product(gr.begin(), gr.end(), d.begin(), 0.0);
    if (gd >= 0) {
      mem.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -gr[i];
      steepest = true;
    }

    bool accepted = false;
    MeritPoint next;
    double alpha = 1.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      alpha = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        double actual = 0;
        for (std::size_t i = 0; i < n; ++i) {
          xt[i] = clampd(x[i] + alpha * d[i], xlo[i], xhi[i]);
          actual += cur.grad[i] * (xt[i] - x[i]);
        }
        MeritPoint trial = merit(xt, /*need_grad=*/false);
        if (trial.finite &&
            trial.phi <= cur.phi + opts.armijo_c * std::min(actual, 0.0)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted && !steepest) {
        mem.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = -gr[i];
        steepest = true;
      } else {
        break;
      }
    }
    if (!accepted) break;  // line search exhausted: local stationarity
    next = merit(xt);      // gradient only for the accepted point

    // Accepted steps with no measurable merit decrease mean the inner problem
    // is done to machine precision; hand control back to the outer loop.
    if (cur.phi - next.phi <= 1e-12 * (1.0 + std::abs(cur.phi))) {
      if (++no_progress >= 3) {
        x = xt;
        cur = std::move(next);
        ++out.iterations;
        break;
      }
    } else {
      no_progress = 0;
    }

    std::vector<double> next_gr = reduce(xt, next.grad);
    std::vector<double> si(n), yi(n);
    for (std::size_t i = 0; i < n; ++i) {
      si[i] = xt[i] - x[i];
      yi[i] = next_gr[i] - gr[i];
    }
    mem.push(std::move(si), std::move(yi));
    x = xt;
    gr = std::move(next_gr);
    cur = std::move(next);
    ++out.iterations;
    if (opts.log)
      *opts.log << tag << " " << iter_offset + out.iterations << " "
                << cur.phi << " " << cur.violation << " " << cur.objective
                << " " << alpha << "\n";
  }
  out.point = std::move(cur);
  return out;
}

}  // namespace

SolveResult solve_nlp(const NlpProblem& problem, const CompiledNlp& compiled,
                      std::vector<double> x0, const SolverOptions& opts,
                      SolvePhase phase, std::vector<double>* warm_multipliers) {
  const auto t0 = std::chrono::steady_clock::now();
  const int nc = compiled.num_cons();
  std::vector<double> lam(nc, 0.0);
  if (warm_multipliers &&
      static_cast<int>(warm_multipliers->size()) == nc)
    lam = *warm_multipliers;
  double mu = opts.penalty_initial;

  MeritFn merit{compiled,
                problem.lower,
                problem.upper,
                &lam,
                mu,
                phase == SolvePhase::Cost ? 1.0 : 0.0,
                phase == SolvePhase::Feasibility ? &problem.slack_indices
                                                 : nullptr,
                phase == SolvePhase::Feasibility ? opts.slack_penalty : 0.0,
                {}};

  std::vector<double> x = std::move(x0);
  const char* tag = phase == SolvePhase::Cost ? "cost" : "feas";

  SolveResult res;
  res.status = SolveStatus::IterationLimit;
  // Feasibility subproblems are solved tighter than the stationarity goal:
  // the achievable constraint residual tracks the inner accuracy.
  const double tol_floor = phase == SolvePhase::Feasibility
                               ? 0.01 * opts.optimality_tol
                               : opts.optimality_tol;
  double inner_tol = std::max(tol_floor, 1e-2);
  double best_viol = std::numeric_limits<double>::infinity();
  double best_pg = std::numeric_limits<double>::infinity();
  int stalled = 0, pg_stalled = 0;
  MeritPoint final_point;
  double final_pg = 0;

  for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
    merit.mu = mu;
    int budget = std::min(opts.max_inner_iterations,
                          opts.max_total_iterations - res.iterations);
    if (budget <= 0) break;
    InnerOutcome inner =
        minimize_inner(merit, x, inner_tol, budget, opts, tag, res.iterations);
    res.iterations += inner.iterations;
    final_point = std::move(inner.point);
    final_pg = inner.pg_norm;
    const double viol = final_point.violation;

    lam = final_point.w;
    if (viol <= opts.constraint_tol) {
      // Phase one needs a feasible point with enough stationarity for the
      // multipliers to be useful downstream, not a fully polished optimum.
      if (final_pg <= opts.optimality_tol && inner_tol <= opts.optimality_tol) {
        res.status = phase == SolvePhase::Cost ? SolveStatus::Optimal
                                               : SolveStatus::Feasible;
        break;
      }
      // Feasible but stationarity has plateaued: further outer rounds only
      // burn budget, so settle for the feasible point.
      if (final_pg < 0.5 * best_pg) {
        best_pg = final_pg;
        pg_stalled = 0;
      } else if (++pg_stalled >= 4) {
        res.status = SolveStatus::Feasible;
        break;
      }
      inner_tol = std::max(tol_floor, inner_tol * 0.2);
    } else {
      if (viol > 0.25 * best_viol) {
        if (mu >= opts.penalty_max) {
          if (++stalled >= 15) {
            res.status = SolveStatus::Infeasible;
            break;
          }
        }
        mu = std::min(mu * opts.penalty_growth, opts.penalty_max);
      } else {
        stalled = 0;
      }
      inner_tol = std::max(tol_floor, inner_tol * 0.5);
    }
    best_viol = std::min(best_viol, viol);
  }

  if (res.status == SolveStatus::IterationLimit &&
      final_point.violation <= opts.constraint_tol)
    res.status = SolveStatus::Feasible;

  if (warm_multipliers) *warm_multipliers = lam;
  res.x = std::move(x);
  res.objective = final_point.objective;
  res.max_violation = final_point.violation;
  // The augmented Lagrangian accumulates w with phi = f + w^T c curvature;
  // the reported multipliers follow the L = f - nu^T c convention instead.
  res.multipliers = std::move(final_point.w);
  for (double& v : res.multipliers) v = -v;
  res.family_violation = evaluate_violations(problem, res.x);
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

SolveResult co_optimize(NlpProblem& problem, const CompiledNlp& compiled,
                        std::vector<double> x0, const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const DecisionLayout& lay = problem.layout;
  SolveResult best;
  best.status = SolveStatus::Infeasible;
  int total_iterations = 0;

  for (int restart = 0; restart <= opts.restart_budget; ++restart) {
    std::vector<double> x = x0;
    if (restart > 0 && lay.m > 0) {
      // Fresh uniform actuation draw; everything else restarts from the
      // same interpolated guess.
      std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ull *
                                          static_cast<std::uint64_t>(restart));
      double xi = 0;
      for (int k = 0; k < lay.K; ++k)
        for (int j = 0; j < lay.m; ++j) {
          double lim = problem.u_limits[j];
          double u = uniform_draw(rng(), -lim, lim);
          x[lay.u_index(k, j)] = u;
          xi = std::max(xi, std::abs(u));
        }
      x[lay.xi_index()] = xi;
    }

    bool feasible = true;
    std::vector<double> lam;  // carried across relaxation stages
    for (double s : opts.slack_schedule) {
      problem.set_slack_limit(s);
      SolveResult feas = solve_nlp(problem, compiled, x, opts,
                                   SolvePhase::Feasibility, &lam);
      total_iterations += feas.iterations;
      x = feas.x;
      // A stage that stalls barely over tolerance often yields to a second
      // pass: re-entry resets the penalty while the multipliers stay warm.
      // The fresh penalty can also wander, so keep the better iterate.
      for (int retry = 0;
           retry < 2 && feas.max_violation > opts.constraint_tol &&
           feas.max_violation < 1e3 * opts.constraint_tol;
           ++retry) {
        std::vector<double> lam_try = lam;
        SolveResult again = solve_nlp(problem, compiled, x, opts,
                                      SolvePhase::Feasibility, &lam_try);
        total_iterations += again.iterations;
        if (again.max_violation >= feas.max_violation) break;
        x = again.x;
        lam = std::move(lam_try);
        feas = std::move(again);
      }
      if (opts.log) {
        std::string worst;
        double worst_d = 0;
        for (const auto& b : problem.blocks)
          for (std::size_t i = 0; i < b.exprs.size(); ++i) {
            double d = row_dist(evaluate1(b.exprs[i], x), b.lower[i], b.upper[i]);
            if (d > worst_d) {
              worst_d = d;
              worst = b.label + "[" + std::to_string(i) + "]";
            }
          }
        *opts.log << "stage restart=" << restart << " slack=" << s
                  << " violation=" << feas.max_violation
                  << " iterations=" << feas.iterations
                  << " worst=" << worst << " " << worst_d << "\n";
      }
      if (feas.max_violation > opts.constraint_tol) {
        feasible = false;
        if (feas.max_violation < best.max_violation ||
            best.x.empty()) {
          best = std::move(feas);
          best.status = SolveStatus::Infeasible;
        }
        break;
      }
    }
    if (!feasible) continue;

    SolveResult cost =
        solve_nlp(problem, compiled, x, opts, SolvePhase::Cost, &lam);
    total_iterations += cost.iterations;
    if (cost.max_violation > opts.constraint_tol) {
      // Cost descent may trade away a little feasibility; restore it before
      // giving up on the attempt.
      SolveResult fixed = solve_nlp(problem, compiled, cost.x, opts,
                                    SolvePhase::Feasibility, &lam);
      total_iterations += fixed.iterations;
      if (fixed.max_violation <= opts.constraint_tol) {
        fixed.status = SolveStatus::Feasible;
        cost = std::move(fixed);
      } else {
        cost.x = fixed.x;
        cost.max_violation = fixed.max_violation;
        cost.family_violation = fixed.family_violation;
      }
    }
    if (cost.max_violation > opts.constraint_tol) {
      if (cost.max_violation < best.max_violation || best.x.empty()) {
        best = std::move(cost);
        best.status = SolveStatus::Infeasible;
      }
      continue;
    }

    // The torque bound is only constrained from below by the epigraph rows;
    // pin it to the realized peak so the reported bound is exact.
    if (lay.m > 0 &&
        problem.objective_spec.mode == ObjectiveSpec::Mode::Actuation) {
      double peak = 0;
      for (int k = 0; k < lay.K; ++k)
        for (int j = 0; j < lay.m; ++j)
          peak = std::max(peak, std::abs(cost.x[lay.u_index(k, j)]));
      int xi = lay.xi_index();
      cost.x[xi] = clampd(peak, problem.lower[xi], problem.upper[xi]);
      std::vector<double> values;
      compiled.eval(cost.x, values);
      cost.objective = compiled.objective(values);
      cost.family_violation = evaluate_violations(problem, cost.x);
      cost.max_violation = 0;
      for (const auto& [fam, v] : cost.family_violation)
        cost.max_violation = std::max(cost.max_violation, v);
    }

    cost.iterations = total_iterations;
    cost.restarts_used = restart;
    cost.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return cost;
  }

  // A failed attempt may have stopped at a loose relaxation stage; report
  // its violations against the final relaxation so they are not understated.
  if (!best.x.empty() && !opts.slack_schedule.empty()) {
    double s_final = opts.slack_schedule.back();
    problem.set_slack_limit(s_final);
    for (int idx : problem.slack_indices)
      best.x[idx] = clampd(best.x[idx], 0.0, s_final);
    best.family_violation = evaluate_violations(problem, best.x);
    best.max_violation = 0;
    for (const auto& [fam, v] : best.family_violation)
      best.max_violation = std::max(best.max_violation, v);
  }
  best.iterations = total_iterations;
  best.restarts_used = opts.restart_budget;
  best.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return best;
}

std::map<std::string, double> evaluate_violations(const NlpProblem& problem,
                                                  std::span<const double> x) {
  std::map<std::string, double> out;
  for (ConstraintFamily f :
       {ConstraintFamily::Dynamics, ConstraintFamily::Contact,
        ConstraintFamily::Task, ConstraintFamily::Parametric,
        ConstraintFamily::Design, ConstraintFamily::Epigraph})
    out[family_name(f)] = 0.0;
  for (const auto& b : problem.blocks) {
    std::vector<double> vals = evaluate(b.exprs, x);
    double& v = out[family_name(b.family)];
    for (std::size_t i = 0; i < vals.size(); ++i)
      v = std::max(v, row_dist(vals[i], b.lower[i], b.upper[i]));
  }
  return out;
}

KktReport kkt_residual(const NlpProblem& problem, const CompiledNlp& compiled,
                       std::span<const double> x,
                       std::span<const double> nu) {
  std::vector<double> values;
  compiled.eval(x, values);
  KktReport rep;

  std::vector<double> g(x.size(), 0.0);
  compiled.add_objective_gradient(values, 1.0, g);
  std::vector<double> negnu(nu.begin(), nu.end());
  for (double& v : negnu) v = -v;
  compiled.add_jacobian_transpose(values, negnu, g);
  for (std::size_t i = 0; i < x.size(); ++i) {
    bool at_lo = x[i] <= problem.lower[i] + 1e-12;
    bool at_hi = x[i] >= problem.upper[i] - 1e-12;
    if (at_lo && g[i] > 0) continue;
    if (at_hi && g[i] < 0) continue;
    rep.stationarity = std::max(rep.stationarity, std::abs(g[i]));
  }

  auto c = compiled.constraints(values);
  const auto& lo = compiled.row_lower();
  const auto& hi = compiled.row_upper();
  for (int i = 0; i < compiled.num_cons(); ++i) {
    rep.primal_feasibility =
        std::max(rep.primal_feasibility, row_dist(c[i], lo[i], hi[i]));
    if (lo[i] == hi[i]) continue;  // equality: nu free
    double dist_lo = lo[i] <= -kInfinity ? kInfinity : c[i] - lo[i];
    double dist_hi = hi[i] >= kInfinity ? kInfinity : hi[i] - c[i];
    // nu >= 0 belongs to an active lower bound, nu <= 0 to an active upper.
    if (dist_lo <= dist_hi)
      rep.dual_feasibility = std::max(rep.dual_feasibility, -nu[i]);
    else
      rep.dual_feasibility = std::max(rep.dual_feasibility, nu[i]);
    double active_gap = std::max(0.0, std::min(dist_lo, dist_hi));
    rep.complementarity =
        std::max(rep.complementarity, std::abs(nu[i]) * active_gap);
  }
  rep.dual_feasibility = std::max(rep.dual_feasibility, 0.0);
  return rep;
}

}  // namespace cotraj
