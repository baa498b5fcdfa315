#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cubic_observer/numlin.hpp"

// Scalar nonlinearity expressions with references to the state, to delayed
// inputs and to delayed outputs.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ['-'] atom ['^' uint]
//   atom   := number | var | func '(' expr ')' | '(' expr ')'
//   var    := ('x'|'u'|'y') uint ['@' uint]   |   't'
//   func   := sin | cos | tanh | exp | abs
//
// `u2@1` is input channel 2 delayed by the first entry of the input delay
// list; `u2` (slot 0) is undelayed. `t` is only accepted when the parse
// dimensions allow it (input signal expressions).
namespace cubic_observer::expr {

enum class VarKind { State, Input, Output, Time };

struct VarRef {
  VarKind kind = VarKind::State;
  int index = 1;       // 1-based component
  int delay_slot = 0;  // 0 = undelayed

  friend bool operator==(const VarRef&, const VarRef&) = default;
};

enum class BinOp { Add, Sub, Mul, Div };
enum class Func { Sin, Cos, Tanh, Exp, Abs };

struct Node;

// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();  // constant 0

  static Expr constant(double value);  // value must be finite and >= 0
  static Expr var(VarRef ref);
  static Expr negate(Expr operand);
  static Expr binary(BinOp op, Expr lhs, Expr rhs);
  static Expr power(Expr base, unsigned exponent);
  static Expr call(Func func, Expr arg);

  const Node& node() const { return *node_; }

  // True if any reference of the given kind occurs in the tree.
  bool references(VarKind kind) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Constant {
  double value;
};
struct Negate {
  Expr operand;
};
struct Binary {
  BinOp op;
  Expr lhs;
  Expr rhs;
};
struct Power {
  Expr base;
  unsigned exponent;
};
struct Call {
  Func func;
  Expr arg;
};

struct Node {
  std::variant<Constant, VarRef, Negate, Binary, Power, Call> value;
};

// Dimensions a parsed expression is checked against.
struct Dims {
  int n = 0;        // state
  int n_u = 0;      // inputs
  int n_y = 0;      // outputs
  int n_delta = 0;  // length of the input delay list
  int n_tau = 0;    // length of the output delay list
  bool allow_state = true;
  bool allow_time = false;
};

// Every variable reference in the tree, in left-to-right order.
std::vector<VarRef> collect_refs(const Expr& e);

// Throws ParseError (with character position) or RangeError.
Expr parse(std::string_view text, const Dims& dims);

// Fully parenthesized; parse(print(e)) == e.
std::string print(const Expr& e);

// Values the evaluator reads. u[s] / y[s] hold the input / output vector at
// delay slot s (slot 0 undelayed), so u.size() must be n_delta + 1.
struct EvalEnv {
  std::span<const double> x;
  std::span<const Vec> u;
  std::span<const Vec> y;
  double t = 0.0;
};

// Throws EvalError on division by zero or a non-finite intermediate.
double eval(const Expr& e, const EvalEnv& env);

std::string_view func_name(Func f);

}  // namespace cubic_observer::expr
