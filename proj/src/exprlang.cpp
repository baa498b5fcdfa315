#include "cubic_observer/exprlang.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "cubic_observer/errors.hpp"

namespace cubic_observer::expr {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::array<std::pair<std::string_view, Func>, 5> kFuncs{{
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"tanh", Func::Tanh},
    {"exp", Func::Exp},
    {"abs", Func::Abs},
}};

std::string describe(const VarRef& r) {
  if (r.kind == VarKind::Time) {
    return "t";
  }
  const char prefix = r.kind == VarKind::State ? 'x' : r.kind == VarKind::Input ? 'u' : 'y';
  std::string s = prefix + std::to_string(r.index);
  if (r.delay_slot > 0) {
    s += "@" + std::to_string(r.delay_slot);
  }
  return s;
}

class Parser {
 public:
  Parser(std::string_view text, const Dims& dims) : text_(text), dims_(dims) {}

  Expr parse_all() {
    skip_ws();
    if (at_end()) {
      throw ParseError("empty expression", pos_);
    }
    Expr e = parse_expr();
    skip_ws();
    if (!at_end()) {
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    }
    return e;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (!at_end() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinOp::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expr::binary(BinOp::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinOp::Mul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = Expr::binary(BinOp::Div, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_factor() {
    const bool negated = accept('-');
    Expr e = parse_atom();
    if (accept('^')) {
      skip_ws();
      e = Expr::power(e, parse_uint("exponent"));
    }
    return negated ? Expr::negate(e) : e;
  }

  unsigned parse_uint(const char* what) {
    const std::size_t start = pos_;
    unsigned value = 0;
    const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc{} || ptr == text_.data() + start) {
      throw ParseError(std::string("expected unsigned integer ") + what, start);
    }
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  Expr parse_atom() {
    skip_ws();
    if (at_end()) {
      throw ParseError("unexpected end of expression", pos_);
    }
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      return parse_identifier();
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++k;
      }
      return k;
    };
    std::size_t mantissa = digits();
    if (!at_end() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      throw ParseError("malformed number", start);
    }
    if (!at_end() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (!at_end() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        ++pos_;
      }
      if (digits() == 0) {
        throw ParseError("malformed exponent", start);
      }
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc{} || ptr != text_.data() + pos_ || !std::isfinite(value)) {
      throw ParseError("number out of range", start);
    }
    if (!at_end() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      throw ParseError("implicit multiplication is not allowed", pos_);
    }
    return Expr::constant(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (!at_end() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    const std::string_view word = text_.substr(start, pos_ - start);
    for (const auto& [name, func] : kFuncs) {
      if (word == name) {
        expect('(');
        Expr arg = parse_expr();
        expect(')');
        return Expr::call(func, arg);
      }
    }
    if (word == "t") {
      if (!dims_.allow_time) {
        throw RangeError("time variable 't' is not allowed here");
      }
      return Expr::var({VarKind::Time, 0, 0});
    }
    if (word.size() != 1 || (word[0] != 'x' && word[0] != 'u' && word[0] != 'y')) {
      throw ParseError("unknown identifier '" + std::string(word) + "'", start);
    }
    VarRef ref;
    ref.kind = word[0] == 'x' ? VarKind::State : word[0] == 'u' ? VarKind::Input : VarKind::Output;
    ref.index = static_cast<int>(parse_uint("variable index"));
    if (!at_end() && text_[pos_] == '@') {
      ++pos_;
      ref.delay_slot = static_cast<int>(parse_uint("delay slot"));
      if (ref.kind == VarKind::State) {
        throw ParseError("state references cannot be delayed", start);
      }
    }
    check_range(ref);
    return Expr::var(ref);
  }

  void check_range(const VarRef& ref) const {
    int dim = 0;
    int slots = 0;
    switch (ref.kind) {
      case VarKind::State:
        if (!dims_.allow_state) {
          throw RangeError("state reference " + describe(ref) + " is not allowed here");
        }
        dim = dims_.n;
        break;
      case VarKind::Input:
        dim = dims_.n_u;
        slots = dims_.n_delta;
        break;
      case VarKind::Output:
        dim = dims_.n_y;
        slots = dims_.n_tau;
        break;
      case VarKind::Time:
        return;
    }
    if (ref.index < 1 || ref.index > dim) {
      throw RangeError("reference " + describe(ref) + " exceeds dimension " + std::to_string(dim));
    }
    if (ref.delay_slot > slots) {
      throw RangeError("reference " + describe(ref) + " uses delay slot " +
                       std::to_string(ref.delay_slot) + " but only " + std::to_string(slots) +
                       " delays are configured");
    }
  }

  std::string_view text_;
  const Dims& dims_;
  std::size_t pos_ = 0;
};

void print_to(const Expr& e, std::string& out) {
  std::visit(
      Overloaded{
          [&](const Constant& c) {
            std::array<char, 64> buf{};
            const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), c.value);
            out.append(buf.data(), res.ptr);
          },
          [&](const VarRef& r) { out += describe(r); },
          [&](const Negate& n) {
            out += "(-";
            print_to(n.operand, out);
            out += ')';
          },
          [&](const Binary& b) {
            static constexpr char kOps[] = {'+', '-', '*', '/'};
            out += '(';
            print_to(b.lhs, out);
            out += kOps[static_cast<int>(b.op)];
            print_to(b.rhs, out);
            out += ')';
          },
          [&](const Power& p) {
            out += '(';
            print_to(p.base, out);
            out += '^';
            out += std::to_string(p.exponent);
            out += ')';
          },
          [&](const Call& c) {
            out += func_name(c.func);
            out += '(';
            print_to(c.arg, out);
            out += ')';
          },
      },
      e.node().value);
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw EvalError(std::string("non-finite result in ") + what);
  }
  return v;
}

double lookup(std::span<const Vec> slots, const VarRef& r, const char* what) {
  if (static_cast<std::size_t>(r.delay_slot) >= slots.size() ||
      r.index > slots[static_cast<std::size_t>(r.delay_slot)].size()) {
    throw DimensionError(std::string("evaluation environment too small for ") + what + " reference " +
                         describe(r));
  }
  return slots[static_cast<std::size_t>(r.delay_slot)](r.index - 1);
}

}  // namespace

Expr::Expr() : node_(std::make_shared<const Node>(Node{Constant{0.0}})) {}

Expr Expr::constant(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw InvalidInput("expression constants must be finite and non-negative");
  }
  return Expr(std::make_shared<const Node>(Node{Constant{value}}));
}

Expr Expr::var(VarRef ref) {
  if (ref.kind == VarKind::State && ref.delay_slot != 0) {
    throw InvalidInput("state references cannot be delayed");
  }
  return Expr(std::make_shared<const Node>(Node{ref}));
}

Expr Expr::negate(Expr operand) {
  return Expr(std::make_shared<const Node>(Node{Negate{std::move(operand)}}));
}

Expr Expr::binary(BinOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}}));
}

Expr Expr::power(Expr base, unsigned exponent) {
  return Expr(std::make_shared<const Node>(Node{Power{std::move(base), exponent}}));
}

Expr Expr::call(Func func, Expr arg) {
  return Expr(std::make_shared<const Node>(Node{Call{func, std::move(arg)}}));
}

bool Expr::references(VarKind kind) const {
  return std::visit(Overloaded{
                        [](const Constant&) { return false; },
                        [&](const VarRef& r) { return r.kind == kind; },
                        [&](const Negate& n) { return n.operand.references(kind); },
                        [&](const Binary& b) { return b.lhs.references(kind) || b.rhs.references(kind); },
                        [&](const Power& p) { return p.base.references(kind); },
                        [&](const Call& c) { return c.arg.references(kind); },
                    },
                    node_->value);
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) {
    return true;
  }
  const auto& va = a.node_->value;
  const auto& vb = b.node_->value;
  if (va.index() != vb.index()) {
    return false;
  }
  return std::visit(
      Overloaded{
          [&](const Constant& c) { return c.value == std::get<Constant>(vb).value; },
          [&](const VarRef& r) { return r == std::get<VarRef>(vb); },
          [&](const Negate& n) { return n.operand == std::get<Negate>(vb).operand; },
          [&](const Binary& x) {
            const auto& y = std::get<Binary>(vb);
            return x.op == y.op && x.lhs == y.lhs && x.rhs == y.rhs;
          },
          [&](const Power& p) {
            const auto& q = std::get<Power>(vb);
            return p.exponent == q.exponent && p.base == q.base;
          },
          [&](const Call& c) {
            const auto& d = std::get<Call>(vb);
            return c.func == d.func && c.arg == d.arg;
          },
      },
      va);
}

std::string_view func_name(Func f) {
  for (const auto& [name, func] : kFuncs) {
    if (func == f) {
      return name;
    }
  }
  return "?";
}

std::vector<VarRef> collect_refs(const Expr& e) {
  std::vector<VarRef> out;
  auto walk = [&](const auto& self, const Expr& node) -> void {
    std::visit(Overloaded{
                   [](const Constant&) {},
                   [&](const VarRef& r) { out.push_back(r); },
                   [&](const Negate& n) { self(self, n.operand); },
                   [&](const Binary& b) {
                     self(self, b.lhs);
                     self(self, b.rhs);
                   },
                   [&](const Power& p) { self(self, p.base); },
                   [&](const Call& c) { self(self, c.arg); },
               },
               node.node().value);
  };
  walk(walk, e);
  return out;
}

Expr parse(std::string_view text, const Dims& dims) { return Parser(text, dims).parse_all(); }

std::string print(const Expr& e) {
  std::string out;
  print_to(e, out);
  return out;
}

double eval(const Expr& e, const EvalEnv& env) {
  return std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [&](const VarRef& r) {
            switch (r.kind) {
              case VarKind::State:
                if (static_cast<std::size_t>(r.index) > env.x.size()) {
                  throw DimensionError("evaluation environment too small for state reference " +
                                       describe(r));
                }
                return env.x[static_cast<std::size_t>(r.index - 1)];
              case VarKind::Input:
                return lookup(env.u, r, "input");
              case VarKind::Output:
                return lookup(env.y, r, "output");
              case VarKind::Time:
                return env.t;
            }
            return 0.0;
          },
          [&](const Negate& n) { return -eval(n.operand, env); },
          [&](const Binary& b) {
            const double l = eval(b.lhs, env);
            const double r = eval(b.rhs, env);
            switch (b.op) {
              case BinOp::Add:
                return checked(l + r, "addition");
              case BinOp::Sub:
                return checked(l - r, "subtraction");
              case BinOp::Mul:
                return checked(l * r, "multiplication");
              case BinOp::Div:
                if (r == 0.0) {
                  throw EvalError("division by zero");
                }
                return checked(l / r, "division");
            }
            return 0.0;
          },
          [&](const Power& p) {
            const double base = eval(p.base, env);
            double acc = 1.0;
            double sq = base;
            for (unsigned k = p.exponent; k != 0; k >>= 1) {
              if (k & 1U) {
                acc *= sq;
              }
              sq *= sq;
            }
            return checked(acc, "power");
          },
          [&](const Call& c) {
            const double a = eval(c.arg, env);
            switch (c.func) {
              case Func::Sin:
                return std::sin(a);
              case Func::Cos:
                return std::cos(a);
              case Func::Tanh:
                return std::tanh(a);
              case Func::Exp:
                return checked(std::exp(a), "exp");
              case Func::Abs:
                return std::abs(a);
            }
            return 0.0;
          },
      },
      e.node().value);
}

}  // namespace cubic_observer::expr
