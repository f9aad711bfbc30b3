#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotraj {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnboundVariable : EvalError {
  using EvalError::EvalError;
};
struct NonFiniteResult : EvalError {
  using EvalError::EvalError;
};

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Sin,
  Cos,
  Sqrt,
  Add,
  Sub,
  Mul,
  Div,
  PowInt,
};

/// Immutable scalar expression node in a shared DAG. Copies are cheap
/// handles; graphs are safe to evaluate concurrently once built.
class Expr {
 public:
  Expr() : Expr(0.0) {}
  Expr(double c);
  Expr(int c) : Expr(static_cast<double>(c)) {}

  static Expr variable(int index);
  static Expr constant(double c);

  Op op() const { return n_->op; }
  bool is_const() const { return n_->op == Op::Const; }
  bool is_const(double v) const { return is_const() && n_->c == v; }
  double const_value() const { return n_->c; }
  bool is_var() const { return n_->op == Op::Var; }
  int var_index() const { return n_->aux; }
  int pow_exponent() const { return n_->aux; }
  Expr child_a() const { return Expr(n_->a); }
  Expr child_b() const { return Expr(n_->b); }
  bool has_b() const { return n_->b != nullptr; }

  /// Node identity, usable as a memoization key.
  const void* id() const { return n_.get(); }
  bool same_node(const Expr& o) const { return n_ == o.n_; }

  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(const Expr& o);
  Expr& operator/=(const Expr& o);

 private:
  struct Node {
    Op op;
    double c = 0.0;  // constant value
    int aux = 0;     // variable index or integer exponent
    std::shared_ptr<const Node> a, b;
    ~Node();
  };
  explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  static Expr make(Op op, double c, int aux, Expr a, Expr b);

  std::shared_ptr<const Node> n_;

  friend Expr operator+(const Expr&, const Expr&);
  friend Expr operator-(const Expr&, const Expr&);
  friend Expr operator*(const Expr&, const Expr&);
  friend Expr operator/(const Expr&, const Expr&);
  friend Expr operator-(const Expr&);
  friend Expr sin(const Expr&);
  friend Expr cos(const Expr&);
  friend Expr sqrt(const Expr&);
  friend Expr pow_int(const Expr&, int);
  friend class ExprWalk;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);
Expr pow_int(const Expr& a, int k);

/// sqrt(x^2 + eps^2): a C-infinity stand-in for |x|.
Expr smooth_abs(const Expr& x, double eps = 1e-9);

/// Evaluates expressions at a point by recursive (memoized) traversal of
/// the DAG. Throws UnboundVariable / NonFiniteResult.
std::vector<double> evaluate(std::span<const Expr> exprs,
                             std::span<const double> point);
double evaluate1(const Expr& e, std::span<const double> point);

struct JacobianEntry {
  int row;
  int col;  // variable index
  Expr value;
};

/// Structurally sparse Jacobian: absent entries are identically zero.
struct SparseJacobian {
  int rows = 0;
  int cols = 0;
  std::vector<JacobianEntry> entries;
};

/// Exact symbolic Jacobian of exprs with respect to the given variables.
/// Entries whose derivative simplifies to literal zero are omitted.
SparseJacobian differentiate(std::span<const Expr> exprs,
                             std::span<const int> wrt);

/// Single partial derivative (convenience wrapper).
Expr derivative(const Expr& e, int var);

/// Sorted list of variable indices an expression depends on.
std::vector<int> variables_of(std::span<const Expr> exprs);

/// One past the largest variable index referenced (0 if none).
int variable_span(std::span<const Expr> exprs);

/// Flattened evaluation tape with common-subexpression sharing.
class Tape {
 public:
  struct Instr {
    Op op;
    std::int32_t a = -1;  // slot of first operand, or variable index for Var
    std::int32_t b = -1;  // slot of second operand, or exponent for PowInt
    double c = 0.0;       // constant payload
  };

  std::size_t output_arity() const { return outputs_.size(); }
  int input_arity() const { return input_arity_; }
  std::size_t size() const { return code_.size(); }

  void evaluate(std::span<const double> x, std::span<double> out) const;
  /// Same, reusing a caller-held work array across calls.
  void evaluate(std::span<const double> x, std::span<double> out,
                std::vector<double>& scratch) const;
  std::vector<double> evaluate(std::span<const double> x) const;

 private:
  std::vector<Instr> code_;
  std::vector<std::int32_t> outputs_;
  int input_arity_ = 0;
  friend Tape compile(std::span<const Expr> exprs);
};

Tape compile(std::span<const Expr> exprs);

}  // namespace cotraj
