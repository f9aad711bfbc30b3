#include "cotraj/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <utility>

namespace cotraj {

Expr::Node::~Node() {
  // Iterative teardown so long chains do not recurse on destruction.
  std::vector<std::shared_ptr<const Node>> stack;
  auto grab = [&stack](std::shared_ptr<const Node>& p) {
    if (p && p.use_count() == 1) stack.push_back(std::move(p));
    p.reset();
  };
  grab(a);
  grab(b);
  while (!stack.empty()) {
    // Last owner: detach children before the node itself dies.
    auto n = std::move(stack.back());
    stack.pop_back();
    auto* m = const_cast<Node*>(n.get());
    grab(m->a);
    grab(m->b);
  }
}

Expr::Expr(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->c = c;
  n_ = std::move(n);
}

Expr Expr::make(Op op, double c, int aux, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->c = c;
  n->aux = aux;
  n->a = std::move(a.n_);
  n->b = std::move(b.n_);
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw std::invalid_argument("negative variable index");
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->aux = index;
  return Expr(std::move(n));
}

Expr Expr::constant(double c) { return Expr(c); }

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.const_value() + b.const_value());
  if (a.is_const(0.0)) return b;
  if (b.is_const(0.0)) return a;
  return Expr::make(Op::Add, 0, 0, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.const_value() - b.const_value());
  if (b.is_const(0.0)) return a;
  if (a.is_const(0.0)) return -b;
  if (a.same_node(b)) return Expr(0.0);
  return Expr::make(Op::Sub, 0, 0, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.const_value() * b.const_value());
  if (a.is_const(0.0) || b.is_const(0.0)) return Expr(0.0);
  if (a.is_const(1.0)) return b;
  if (b.is_const(1.0)) return a;
  return Expr::make(Op::Mul, 0, 0, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) {
    double v = a.const_value() / b.const_value();
    if (!std::isfinite(v)) throw NonFiniteResult("constant division is not finite");
    return Expr(v);
  }
  if (b.is_const(1.0)) return a;
  if (a.is_const(0.0)) return Expr(0.0);
  return Expr::make(Op::Div, 0, 0, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_const()) return Expr(-a.const_value());
  if (a.op() == Op::Neg) return a.child_a();
  return Expr::make(Op::Neg, 0, 0, a, Expr());
}

Expr sin(const Expr& a) {
  if (a.is_const()) return Expr(std::sin(a.const_value()));
  return Expr::make(Op::Sin, 0, 0, a, Expr());
}

Expr cos(const Expr& a) {
  if (a.is_const()) return Expr(std::cos(a.const_value()));
  return Expr::make(Op::Cos, 0, 0, a, Expr());
}

Expr sqrt(const Expr& a) {
  if (a.is_const()) {
    double v = std::sqrt(a.const_value());
    if (!std::isfinite(v)) throw NonFiniteResult("sqrt of negative constant");
    return Expr(v);
  }
  return Expr::make(Op::Sqrt, 0, 0, a, Expr());
}

Expr pow_int(const Expr& a, int k) {
  if (k == 0) return Expr(1.0);
  if (k == 1) return a;
  if (a.is_const()) return Expr(std::pow(a.const_value(), k));
  return Expr::make(Op::PowInt, 0, k, a, Expr());
}

Expr smooth_abs(const Expr& x, double eps) {
  return sqrt(x * x + Expr(eps * eps));
}

Expr& Expr::operator+=(const Expr& o) { return *this = *this + o; }
Expr& Expr::operator-=(const Expr& o) { return *this = *this - o; }
Expr& Expr::operator*=(const Expr& o) { return *this = *this * o; }
Expr& Expr::operator/=(const Expr& o) { return *this = *this / o; }

namespace {

// Iterative post-order walk over the DAG; visits each node once.
template <typename Visit>
void postorder(std::span<const Expr> roots, Visit&& visit) {
  struct Frame {
    Expr e;
    bool expanded;
  };
  std::unordered_map<const void*, bool> seen;
  std::vector<Frame> stack;
  for (const Expr& r : roots) stack.push_back({r, false});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    auto it = seen.find(f.e.id());
    if (it != seen.end() && it->second) continue;
    if (f.expanded) {
      seen[f.e.id()] = true;
      visit(f.e);
      continue;
    }
    if (it == seen.end()) seen.emplace(f.e.id(), false);
    stack.push_back({f.e, true});
    Op op = f.e.op();
    if (op != Op::Const && op != Op::Var) {
      stack.push_back({f.e.child_a(), false});
      if (f.e.has_b()) stack.push_back({f.e.child_b(), false});
    }
  }
}

double apply_unary(Op op, double a, int aux) {
  switch (op) {
    case Op::Neg:
      return -a;
    case Op::Sin:
      return std::sin(a);
    case Op::Cos:
      return std::cos(a);
    case Op::Sqrt:
      return std::sqrt(a);
    case Op::PowInt:
      return std::pow(a, aux);
    default:
      throw std::logic_error("not a unary op");
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      return a / b;
    default:
      throw std::logic_error("not a binary op");
  }
}

}  // namespace

std::vector<double> evaluate(std::span<const Expr> exprs,
                             std::span<const double> point) {
  std::unordered_map<const void*, double> memo;
  postorder(exprs, [&](const Expr& e) {
    double v;
    switch (e.op()) {
      case Op::Const:
        v = e.const_value();
        break;
      case Op::Var: {
        int i = e.var_index();
        if (i >= static_cast<int>(point.size()))
          throw UnboundVariable("variable x" + std::to_string(i) +
                                " exceeds point dimension " +
                                std::to_string(point.size()));
        v = point[i];
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        v = apply_binary(e.op(), memo.at(e.child_a().id()),
                         memo.at(e.child_b().id()));
        break;
      default:
        v = apply_unary(e.op(), memo.at(e.child_a().id()), e.pow_exponent());
        break;
    }
    if (!std::isfinite(v)) throw NonFiniteResult("non-finite value in evaluation");
    memo.emplace(e.id(), v);
  });
  std::vector<double> out;
  out.reserve(exprs.size());
  for (const Expr& e : exprs) out.push_back(memo.at(e.id()));
  return out;
}

double evaluate1(const Expr& e, std::span<const double> point) {
  return evaluate(std::span<const Expr>(&e, 1), point)[0];
}

std::vector<int> variables_of(std::span<const Expr> exprs) {
  std::vector<int> vars;
  postorder(exprs, [&](const Expr& e) {
    if (e.is_var()) vars.push_back(e.var_index());
  });
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

int variable_span(std::span<const Expr> exprs) {
  auto vars = variables_of(exprs);
  return vars.empty() ? 0 : vars.back() + 1;
}

namespace {

using VarSet = std::shared_ptr<const std::vector<int>>;

VarSet merge_sets(const VarSet& a, const VarSet& b) {
  if (!a || a->empty()) return b;
  if (!b || b->empty()) return a;
  if (a == b) return a;
  auto out = std::make_shared<std::vector<int>>();
  out->reserve(a->size() + b->size());
  std::set_union(a->begin(), a->end(), b->begin(), b->end(),
                 std::back_inserter(*out));
  if (out->size() == a->size()) return a;
  if (out->size() == b->size()) return b;
  return out;
}

// Per-node dependence sets for the whole DAG reachable from roots.
std::unordered_map<const void*, VarSet> dependence_sets(
    std::span<const Expr> roots) {
  std::unordered_map<const void*, VarSet> dep;
  static const VarSet kEmpty = std::make_shared<const std::vector<int>>();
  postorder(roots, [&](const Expr& e) {
    switch (e.op()) {
      case Op::Const:
        dep.emplace(e.id(), kEmpty);
        break;
      case Op::Var:
        dep.emplace(e.id(), std::make_shared<const std::vector<int>>(
                                std::vector<int>{e.var_index()}));
        break;
      default: {
        VarSet s = dep.at(e.child_a().id());
        if (e.has_b()) s = merge_sets(s, dep.at(e.child_b().id()));
        dep.emplace(e.id(), std::move(s));
      }
    }
  });
  return dep;
}

struct DiffCtx {
  const std::unordered_map<const void*, VarSet>& dep;
  std::unordered_map<const void*, Expr> memo;  // keyed per (call, var)
  int var = -1;

  bool depends(const Expr& e) const {
    const auto& s = dep.at(e.id());
    return s && std::binary_search(s->begin(), s->end(), var);
  }

  Expr diff(const Expr& e) {
    if (!depends(e)) return Expr(0.0);
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    Expr d;
    switch (e.op()) {
      case Op::Var:
        d = Expr(1.0);
        break;
      case Op::Neg:
        d = -diff(e.child_a());
        break;
      case Op::Sin:
        d = cos(e.child_a()) * diff(e.child_a());
        break;
      case Op::Cos:
        d = -(sin(e.child_a()) * diff(e.child_a()));
        break;
      case Op::Sqrt:
        // Reuse the sqrt node itself: d sqrt(a) = da / (2 sqrt(a)).
        d = diff(e.child_a()) / (Expr(2.0) * e);
        break;
      case Op::PowInt: {
        int k = e.pow_exponent();
        d = Expr(double(k)) * pow_int(e.child_a(), k - 1) * diff(e.child_a());
        break;
      }
      case Op::Add:
        d = diff(e.child_a()) + diff(e.child_b());
        break;
      case Op::Sub:
        d = diff(e.child_a()) - diff(e.child_b());
        break;
      case Op::Mul:
        d = diff(e.child_a()) * e.child_b() + e.child_a() * diff(e.child_b());
        break;
      case Op::Div:
        // d(a/b) = (da - (a/b) db) / b, sharing the quotient node.
        d = (diff(e.child_a()) - e * diff(e.child_b())) / e.child_b();
        break;
      default:
        throw std::logic_error("unexpected node in diff");
    }
    memo.emplace(e.id(), d);
    return d;
  }
};

}  // namespace

SparseJacobian differentiate(std::span<const Expr> exprs,
                             std::span<const int> wrt) {
  SparseJacobian jac;
  jac.rows = static_cast<int>(exprs.size());
  jac.cols = wrt.empty() ? variable_span(exprs)
                         : *std::max_element(wrt.begin(), wrt.end()) + 1;
  auto dep = dependence_sets(exprs);
  std::vector<int> cols(wrt.begin(), wrt.end());
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  for (int v : cols) {
    DiffCtx ctx{dep, {}, v};
    for (int r = 0; r < jac.rows; ++r) {
      if (!ctx.depends(exprs[r])) continue;
      Expr d = ctx.diff(exprs[r]);
      if (d.is_const(0.0)) continue;
      jac.entries.push_back({r, v, std::move(d)});
    }
  }
  return jac;
}

Expr derivative(const Expr& e, int var) {
  int wrt[1] = {var};
  auto jac = differentiate(std::span<const Expr>(&e, 1), wrt);
  return jac.entries.empty() ? Expr(0.0) : jac.entries[0].value;
}

namespace {

struct InstrKey {
  Op op;
  std::int32_t a, b;
  double c;
  bool operator==(const InstrKey& o) const {
    return op == o.op && a == o.a && b == o.b &&
           std::memcmp(&c, &o.c, sizeof(double)) == 0;
  }
};

struct InstrKeyHash {
  std::size_t operator()(const InstrKey& k) const {
    std::uint64_t bits;
    std::memcpy(&bits, &k.c, sizeof(bits));
    std::size_t h = std::hash<std::uint64_t>()(bits);
    h ^= std::hash<std::int64_t>()((std::int64_t(k.a) << 20) ^ k.b ^
                                   (std::int64_t(static_cast<int>(k.op)) << 52));
    return h;
  }
};

}  // namespace

Tape compile(std::span<const Expr> exprs) {
  Tape t;
  std::unordered_map<const void*, std::int32_t> slot;
  std::unordered_map<InstrKey, std::int32_t, InstrKeyHash> cse;
  int max_var = -1;

  auto emit = [&](InstrKey key) -> std::int32_t {
    auto it = cse.find(key);
    if (it != cse.end()) return it->second;
    std::int32_t s = static_cast<std::int32_t>(t.code_.size());
    t.code_.push_back({key.op, key.a, key.b, key.c});
    cse.emplace(key, s);
    return s;
  };

  postorder(exprs, [&](const Expr& e) {
    InstrKey key{e.op(), -1, -1, 0.0};
    switch (e.op()) {
      case Op::Const:
        key.c = e.const_value();
        break;
      case Op::Var:
        key.a = e.var_index();
        max_var = std::max(max_var, e.var_index());
        break;
      case Op::PowInt:
        key.a = slot.at(e.child_a().id());
        key.b = e.pow_exponent();
        break;
      default:
        key.a = slot.at(e.child_a().id());
        if (e.has_b()) key.b = slot.at(e.child_b().id());
        break;
    }
    slot.emplace(e.id(), emit(key));
  });

  t.input_arity_ = max_var + 1;
  t.outputs_.reserve(exprs.size());
  for (const Expr& e : exprs) t.outputs_.push_back(slot.at(e.id()));
  return t;
}

void Tape::evaluate(std::span<const double> x, std::span<double> out) const {
  std::vector<double> scratch;
  evaluate(x, out, scratch);
}

void Tape::evaluate(std::span<const double> x, std::span<double> out,
                    std::vector<double>& scratch) const {
  if (static_cast<int>(x.size()) < input_arity_)
    throw UnboundVariable("point dimension " + std::to_string(x.size()) +
                          " below tape input arity " +
                          std::to_string(input_arity_));
  if (out.size() != outputs_.size())
    throw std::invalid_argument("output span size mismatch");
  scratch.resize(code_.size());
  std::vector<double>& w = scratch;
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const:
        w[i] = in.c;
        break;
      case Op::Var:
        w[i] = x[in.a];
        break;
      case Op::Add:
        w[i] = w[in.a] + w[in.b];
        break;
      case Op::Sub:
        w[i] = w[in.a] - w[in.b];
        break;
      case Op::Mul:
        w[i] = w[in.a] * w[in.b];
        break;
      case Op::Div:
        w[i] = w[in.a] / w[in.b];
        break;
      case Op::Neg:
        w[i] = -w[in.a];
        break;
      case Op::Sin:
        w[i] = std::sin(w[in.a]);
        break;
      case Op::Cos:
        w[i] = std::cos(w[in.a]);
        break;
      case Op::Sqrt:
        w[i] = std::sqrt(w[in.a]);
        break;
      case Op::PowInt:
        w[i] = std::pow(w[in.a], in.b);
        break;
    }
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    out[i] = w[outputs_[i]];
    if (!std::isfinite(out[i]))
      throw NonFiniteResult("non-finite value in compiled evaluation");
  }
}

std::vector<double> Tape::evaluate(std::span<const double> x) const {
  std::vector<double> out(outputs_.size());
  evaluate(x, out);
  return out;
}

}  // namespace cotraj
