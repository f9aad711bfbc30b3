#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "cotraj/expr.hpp"

using namespace cotraj;

namespace {

double rng_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1p-53);
}

// Random expression tree over variables [0, nvars), depth-bounded.
// Avoids sqrt/div domains that could leave the safe region.
Expr random_tree(std::mt19937_64& rng, int nvars, int depth) {
  if (depth == 0 || rng() % 5 == 0) {
    if (rng() % 3 == 0) return Expr(rng_uniform(rng, -2.0, 2.0));
    return Expr::variable(static_cast<int>(rng() % nvars));
  }
  // Growth-prone ops get sin-bounded operands so the finite-difference
  // oracle stays inside its truncation-error budget.
  switch (rng() % 8) {
    case 0:
      return random_tree(rng, nvars, depth - 1) + random_tree(rng, nvars, depth - 1);
    case 1:
      return random_tree(rng, nvars, depth - 1) - random_tree(rng, nvars, depth - 1);
    case 2:
      return sin(random_tree(rng, nvars, depth - 1)) *
             random_tree(rng, nvars, depth - 1);
    case 3:
      // Keep denominators away from zero: 2 + sin^2.
      return random_tree(rng, nvars, depth - 1) /
             (Expr(2.0) + pow_int(sin(random_tree(rng, nvars, depth - 1)), 2));
    case 4:
      return sin(random_tree(rng, nvars, depth - 1));
    case 5:
      return cos(random_tree(rng, nvars, depth - 1));
    case 6:
      return pow_int(sin(random_tree(rng, nvars, depth - 1)), 2 + int(rng() % 2));
    default:
      return sqrt(Expr(1.0) + pow_int(sin(random_tree(rng, nvars, depth - 1)), 2));
  }
}

double fd_central(const Expr& e, std::vector<double> x, int var, double h) {
  x[var] += h;
  double fp = evaluate1(e, x);
  x[var] -= 2 * h;
  double fm = evaluate1(e, x);
  return (fp - fm) / (2 * h);
}

}  // namespace

TEST_CASE("evaluate: polynomial substitution") {
  Expr x0 = Expr::variable(0);
  std::vector<Expr> es = {x0 * x0 + Expr(3.0)};
  std::vector<double> p = {2.0};
  CHECK(evaluate(es, p)[0] == doctest::Approx(7.0));
}

TEST_CASE("evaluate: sin identity case") {
  std::vector<Expr> es = {sin(Expr::variable(0))};
  std::vector<double> p = {0.0};
  CHECK(evaluate(es, p)[0] == 0.0);
}

TEST_CASE("evaluate: division by zero raises") {
  std::vector<Expr> es = {Expr::variable(0) / Expr::variable(1)};
  std::vector<double> p = {1.0, 0.0};
  CHECK_THROWS_AS(evaluate(es, p), NonFiniteResult);
}

TEST_CASE("evaluate: unbound variable raises") {
  std::vector<Expr> es = {Expr::variable(3)};
  std::vector<double> p = {1.0};
  CHECK_THROWS_AS(evaluate(es, p), UnboundVariable);
}

TEST_CASE("evaluate: sqrt of negative raises") {
  std::vector<Expr> es = {sqrt(Expr::variable(0))};
  std::vector<double> p = {-1.0};
  CHECK_THROWS_AS(evaluate(es, p), NonFiniteResult);
}

TEST_CASE("differentiate: product rule entry") {
  Expr x0 = Expr::variable(0), x1 = Expr::variable(1);
  std::vector<Expr> es = {x0 * x1};
  std::vector<int> wrt = {0};
  auto jac = differentiate(es, wrt);
  REQUIRE(jac.entries.size() == 1);
  CHECK(jac.entries[0].row == 0);
  CHECK(jac.entries[0].col == 0);
  std::vector<double> p = {5.0, 7.0};
  CHECK(evaluate1(jac.entries[0].value, p) == doctest::Approx(7.0));
}

TEST_CASE("differentiate: structural zero for independent variable") {
  std::vector<Expr> es = {Expr::variable(1)};
  std::vector<int> wrt = {0};
  auto jac = differentiate(es, wrt);
  CHECK(jac.entries.empty());
}

TEST_CASE("differentiate: d/dx of sin(x)*x at 1") {
  Expr x = Expr::variable(0);
  Expr e = sin(x) * x;
  Expr d = derivative(e, 0);
  std::vector<double> p = {1.0};
  double expect = std::cos(1.0) + std::sin(1.0);  // 1.3817732906760363
  CHECK(evaluate1(d, p) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(evaluate1(d, p) == doctest::Approx(1.3818).epsilon(1e-4));
  // Independent finite-difference oracle.
  CHECK(fd_central(e, p, 0, 1e-6) == doctest::Approx(evaluate1(d, p)).epsilon(1e-8));
}

TEST_CASE("gradient correctness: 100 random trees vs central differences") {
  std::mt19937_64 rng(42);
  const int nvars = 4;
  for (int t = 0; t < 100; ++t) {
    Expr e = random_tree(rng, nvars, 8);
    std::vector<int> wrt = {0, 1, 2, 3};
    std::vector<Expr> es = {e};
    auto jac = differentiate(es, wrt);
    for (int pt = 0; pt < 10; ++pt) {
      std::vector<double> x(nvars);
      for (auto& xi : x) xi = rng_uniform(rng, -1.5, 1.5);
      for (const auto& entry : jac.entries) {
        double sym = evaluate1(entry.value, x);
        double fd = fd_central(e, x, entry.col, 1e-6);
        double denom = std::max(std::abs(fd), 1.0);
        if (std::abs(fd) < 1e-2) {
          CHECK(std::abs(sym - fd) <= 1e-8 + 1e-6 * denom);
        } else {
          CHECK(std::abs(sym - fd) / denom <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("structural sparsity soundness: absent entries are zero") {
  std::mt19937_64 rng(7);
  const int nvars = 4;
  for (int t = 0; t < 20; ++t) {
    Expr e = random_tree(rng, nvars, 6);
    std::vector<Expr> es = {e};
    std::vector<int> wrt = {0, 1, 2, 3};
    auto jac = differentiate(es, wrt);
    std::vector<bool> present(nvars, false);
    for (const auto& entry : jac.entries) present[entry.col] = true;
    for (int pt = 0; pt < 5; ++pt) {
      std::vector<double> x(nvars);
      for (auto& xi : x) xi = rng_uniform(rng, -1.0, 1.0);
      for (int v = 0; v < nvars; ++v) {
        if (present[v]) continue;
        double fd = fd_central(e, x, v, 1e-6);
        CHECK(std::abs(fd) <= 1e-7);
      }
    }
  }
}

TEST_CASE("compile: shared subgraph evaluated once") {
  Expr x0 = Expr::variable(0), x1 = Expr::variable(1);
  Expr s = x0 + x1;
  std::vector<Expr> es = {s, s * Expr(2.0)};
  Tape t = compile(es);
  // Slots: x0, x1, add, const 2, mul -> 5 instructions, one add only.
  CHECK(t.size() == 5);
  CHECK(t.output_arity() == 2);
  std::vector<double> p = {1.0, 2.0};
  auto out = t.evaluate(p);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 6.0);
}

TEST_CASE("compile: CSE merges structurally identical distinct nodes") {
  Expr x0 = Expr::variable(0), x1 = Expr::variable(1);
  std::vector<Expr> es = {x0 + x1, (x0 + x1) * Expr(2.0)};  // two distinct add nodes
  Tape t = compile(es);
  CHECK(t.size() == 5);
}

TEST_CASE("compile: empty case") {
  std::vector<Expr> es;
  Tape t = compile(es);
  CHECK(t.output_arity() == 0);
  std::vector<double> p;
  CHECK(t.evaluate(p).empty());
}

TEST_CASE("compile/evaluate equivalence on random inputs") {
  std::mt19937_64 rng(99);
  const int nvars = 5;
  std::vector<Expr> es;
  for (int i = 0; i < 20; ++i) es.push_back(random_tree(rng, nvars, 7));
  Tape t = compile(es);
  for (int pt = 0; pt < 50; ++pt) {
    std::vector<double> x(nvars);
    for (auto& xi : x) xi = rng_uniform(rng, -1.5, 1.5);
    auto ref = evaluate(es, x);
    auto fast = t.evaluate(x);
    for (std::size_t i = 0; i < es.size(); ++i) {
      double denom = std::max(std::abs(ref[i]), 1.0);
      CHECK(std::abs(ref[i] - fast[i]) / denom <= 1e-14);
    }
  }
}

TEST_CASE("compile: at least 10x faster than recursive evaluation at scale") {
  // Large shared-structure expression set standing in for a full
  // constraint system (thousands of nodes, heavy subexpression reuse).
  std::mt19937_64 rng(1234);
  const int nvars = 30;
  std::vector<Expr> layer;
  for (int i = 0; i < nvars; ++i) layer.push_back(Expr::variable(i));
  for (int pass = 0; pass < 8; ++pass) {
    std::vector<Expr> next;
    for (int i = 0; i < nvars; ++i) {
      Expr a = layer[rng() % layer.size()];
      Expr b = layer[rng() % layer.size()];
      next.push_back(sin(a) * b + cos(b) * a + a * b);
    }
    layer = std::move(next);
  }
  Tape t = compile(layer);

  std::vector<std::vector<double>> points(1000, std::vector<double>(nvars));
  for (auto& p : points)
    for (auto& xi : p) xi = rng_uniform(rng, -1.0, 1.0);

  using clock = std::chrono::steady_clock;
  double sink = 0;
  auto t0 = clock::now();
  for (const auto& p : points) sink += t.evaluate(p)[0];
  auto t1 = clock::now();
  // Recursive reference on a 20x subsample, extrapolated.
  auto t2 = clock::now();
  for (int i = 0; i < 50; ++i) sink += evaluate(layer, points[i])[0];
  auto t3 = clock::now();
  double fast = std::chrono::duration<double>(t1 - t0).count();
  double slow = std::chrono::duration<double>(t3 - t2).count() * 20.0;
  INFO("compiled " << fast << "s, recursive (extrapolated) " << slow
                   << "s, sink " << sink);
  CHECK(slow >= 10.0 * fast);
}

TEST_CASE("smooth_abs approximates |x| away from zero") {
  Expr x = Expr::variable(0);
  Expr e = smooth_abs(x);
  std::vector<double> p = {-0.5};
  CHECK(evaluate1(e, p) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(evaluate1(derivative(e, 0), p) == doctest::Approx(-1.0).epsilon(1e-12));
}
