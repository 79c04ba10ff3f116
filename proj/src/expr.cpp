#include "sweepkit/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>

#include "sweepkit/errors.hpp"

namespace sweepkit::expr
{

namespace
{

using Op = Expression::Op;

// ---------------------------------------------------------------------------
// Jet arithmetic
// ---------------------------------------------------------------------------

Jet operator+(const Jet& a, const Jet& b) { return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2}; }
Jet operator-(const Jet& a, const Jet& b) { return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2}; }
Jet operator-(const Jet& a) { return {-a.value, -a.d1, -a.d2}; }
Jet operator*(const Jet& a, const Jet& b)
{
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2};
}
Jet operator/(const Jet& a, const Jet& b)
{
  const double q = a.value / b.value;
  const double q1 = (a.d1 - q * b.d1) / b.value;
  const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) / b.value;
  return {q, q1, q2};
}

// f(u) with f, f', f'' evaluated at u.value
Jet chain(const Jet& u, double f, double df, double ddf)
{
  return {f, df * u.d1, ddf * u.d1 * u.d1 + df * u.d2};
}

Jet apply_sin(const Jet& u) { return chain(u, std::sin(u.value), std::cos(u.value), -std::sin(u.value)); }
Jet apply_cos(const Jet& u) { return chain(u, std::cos(u.value), -std::sin(u.value), -std::cos(u.value)); }
Jet apply_tan(const Jet& u)
{
  const double t = std::tan(u.value);
  const double sec2 = 1.0 + t * t;
  return chain(u, t, sec2, 2.0 * t * sec2);
}
Jet apply_exp(const Jet& u)
{
  const double e = std::exp(u.value);
  return chain(u, e, e, e);
}
Jet apply_log(const Jet& u) { return chain(u, std::log(u.value), 1.0 / u.value, -1.0 / (u.value * u.value)); }
Jet apply_sqrt(const Jet& u)
{
  const double s = std::sqrt(u.value);
  return chain(u, s, 0.5 / s, -0.25 / (s * u.value));
}
Jet pow_const(const Jet& u, double c)
{
  if (c == 0.0)
    return {1.0, 0.0, 0.0};
  if (c == 1.0)
    return u;
  const double f = std::pow(u.value, c);
  const double df = c * std::pow(u.value, c - 1.0);
  const double ddf = (c == 2.0) ? 2.0 : c * (c - 1.0) * std::pow(u.value, c - 2.0);
  return chain(u, f, df, ddf);
}
Jet pow(const Jet& u, const Jet& w) { return apply_exp(w * apply_log(u)); }

double apply_sin(double u) { return std::sin(u); }
double apply_cos(double u) { return std::cos(u); }
double apply_tan(double u) { return std::tan(u); }
double apply_exp(double u) { return std::exp(u); }
double apply_log(double u) { return std::log(u); }
double apply_sqrt(double u) { return std::sqrt(u); }

double pow_const(double u, double c) { return std::pow(u, c); }
double pow(double u, double w) { return std::pow(u, w); }

// ---------------------------------------------------------------------------
// Parser: text -> AST -> folded -> tape
// ---------------------------------------------------------------------------

struct Node
{
  Op op;
  int slot = 0;
  double value = 0.0;
  std::unique_ptr<Node> lhs;
  std::unique_ptr<Node> rhs;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make_leaf(Op op, double value = 0.0, int slot = 0)
{
  auto n = std::make_unique<Node>();
  n->op = op;
  n->value = value;
  n->slot = slot;
  return n;
}

NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr)
{
  auto n = std::make_unique<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser
{
public:
  Parser(std::string_view text, const Symbols& symbols) : text_(text), symbols_(symbols) {}

  NodePtr parse()
  {
    auto root = parse_sum();
    skip_space();
    if (pos_ != text_.size())
      fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

  bool uses_time() const { return uses_time_; }

private:
  [[noreturn]] void fail(const std::string& msg) const
  {
    throw ParseError("expression '" + std::string(text_) + "': " + msg, 1, static_cast<int>(pos_) + 1);
  }

  void skip_space()
  {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c)
  {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c)
    {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum()
  {
    auto lhs = parse_product();
    for (;;)
    {
      if (accept('+'))
        lhs = make_node(Op::add, std::move(lhs), parse_product());
      else if (accept('-'))
        lhs = make_node(Op::sub, std::move(lhs), parse_product());
      else
        return lhs;
    }
  }

  NodePtr parse_product()
  {
    auto lhs = parse_unary();
    for (;;)
    {
      if (accept('*'))
        lhs = make_node(Op::mul, std::move(lhs), parse_unary());
      else if (accept('/'))
        lhs = make_node(Op::div, std::move(lhs), parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary()
  {
    if (accept('-'))
      return make_node(Op::neg, parse_unary());
    if (accept('+'))
      return parse_unary();
    return parse_power();
  }

  NodePtr parse_power()
  {
    auto base = parse_primary();
    if (accept('^'))
      return make_node(Op::pow, std::move(base), parse_unary());
    return base;
  }

  NodePtr parse_primary()
  {
    skip_space();
    if (pos_ >= text_.size())
      fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(')
    {
      ++pos_;
      auto inner = parse_sum();
      if (!accept(')'))
        fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number()
  {
    double value = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{})
      fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return make_leaf(Op::constant, value);
  }

  NodePtr parse_identifier()
  {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    static const std::map<std::string, Op> functions = {
      {"sin", Op::sin}, {"cos", Op::cos}, {"tan", Op::tan},
      {"exp", Op::exp}, {"log", Op::log}, {"sqrt", Op::sqrt}};
    if (auto f = functions.find(name); f != functions.end())
    {
      if (!accept('('))
        fail("expected '(' after " + name);
      auto arg = parse_sum();
      if (!accept(')'))
        fail("expected ')'");
      return make_node(f->second, std::move(arg));
    }
    if (name == "t")
    {
      uses_time_ = true;
      return make_leaf(Op::time);
    }
    if (name == "pi")
      return make_leaf(Op::constant, std::numbers::pi);
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos)
    {
      const int index = std::stoi(name.substr(1));
      if (index < 1 || index > symbols_.dimension)
      {
        pos_ = start;
        fail("coordinate " + name + " outside x1..x" + std::to_string(symbols_.dimension));
      }
      return make_leaf(Op::variable, 0.0, index - 1);
    }
    if (auto k = symbols_.constants.find(name); k != symbols_.constants.end())
      return make_leaf(Op::constant, k->second);
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string_view text_;
  const Symbols& symbols_;
  std::size_t pos_ = 0;
  bool uses_time_ = false;
};

double fold_value(Op op, double a, double b)
{
  switch (op)
  {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::neg: return -a;
    case Op::pow: return std::pow(a, b);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::tan: return std::tan(a);
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::sqrt: return std::sqrt(a);
    default: return a;
  }
}

void fold(NodePtr& node)
{
  if (node->lhs)
    fold(node->lhs);
  if (node->rhs)
    fold(node->rhs);
  const bool lhs_const = node->lhs && node->lhs->op == Op::constant;
  const bool rhs_const = !node->rhs || node->rhs->op == Op::constant;
  if (node->lhs && lhs_const && rhs_const)
  {
    const double v = fold_value(node->op, node->lhs->value, node->rhs ? node->rhs->value : 0.0);
    node = make_leaf(Op::constant, v);
    return;
  }
  if (node->op == Op::pow && node->rhs->op == Op::constant)
  {
    node->op = Op::pow_const;
    node->value = node->rhs->value;
    node->rhs.reset();
  }
}

int emit(const Node& node, std::vector<Expression::Instruction>& tape)
{
  int depth = 1;
  if (node.lhs)
    depth = std::max(depth, emit(*node.lhs, tape));
  if (node.rhs)
    depth = std::max(depth, 1 + emit(*node.rhs, tape));
  tape.push_back({node.op, node.slot, node.value});
  return depth;
}

}  // namespace

Expression Expression::compile(std::string_view text, const Symbols& symbols)
{
  Parser parser(text, symbols);
  NodePtr root = parser.parse();
  fold(root);
  Expression e;
  e.source_ = std::string(text);
  e.dimension_ = symbols.dimension;
  e.uses_time_ = parser.uses_time();
  e.max_stack_ = emit(*root, e.tape_);
  return e;
}

template <class Scalar, class Load>
Scalar Expression::run(Load&& load) const
{
  constexpr int kInline = 32;
  std::array<Scalar, kInline> inline_stack{};
  std::vector<Scalar> heap_stack;
  Scalar* stack = inline_stack.data();
  if (max_stack_ > kInline)
  {
    heap_stack.resize(static_cast<std::size_t>(max_stack_));
    stack = heap_stack.data();
  }
  int top = 0;
  for (const Instruction& ins : tape_)
  {
    switch (ins.op)
    {
      case Op::constant: stack[top++] = Scalar{ins.value}; break;
      case Op::variable: stack[top++] = load(ins.slot); break;
      case Op::time: stack[top++] = load(-1); break;
      case Op::add: --top; stack[top - 1] = stack[top - 1] + stack[top]; break;
      case Op::sub: --top; stack[top - 1] = stack[top - 1] - stack[top]; break;
      case Op::mul: --top; stack[top - 1] = stack[top - 1] * stack[top]; break;
      case Op::div: --top; stack[top - 1] = stack[top - 1] / stack[top]; break;
      case Op::pow: --top; stack[top - 1] = pow(stack[top - 1], stack[top]); break;
      case Op::neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::pow_const: stack[top - 1] = pow_const(stack[top - 1], ins.value); break;
      case Op::sin: stack[top - 1] = apply_sin(stack[top - 1]); break;
      case Op::cos: stack[top - 1] = apply_cos(stack[top - 1]); break;
      case Op::tan: stack[top - 1] = apply_tan(stack[top - 1]); break;
      case Op::exp: stack[top - 1] = apply_exp(stack[top - 1]); break;
      case Op::log: stack[top - 1] = apply_log(stack[top - 1]); break;
      case Op::sqrt: stack[top - 1] = apply_sqrt(stack[top - 1]); break;
    }
  }
  return stack[0];
}

double Expression::operator()(std::span<const double> x, double t) const
{
  return run<double>([&](int slot) { return slot < 0 ? t : x[static_cast<std::size_t>(slot)]; });
}

Jet Expression::jet(std::span<const double> x, double t, std::span<const double> direction) const
{
  return run<Jet>([&](int slot) {
    if (slot < 0)
      return Jet{t, 0.0, 0.0};
    const auto i = static_cast<std::size_t>(slot);
    return Jet{x[i], direction[i], 0.0};
  });
}

void Expression::gradient(std::span<const double> x, double t, std::span<double> out) const
{
  for (int k = 0; k < dimension_; ++k)
  {
    out[static_cast<std::size_t>(k)] = run<Jet>([&](int slot) {
                                          if (slot < 0)
                                            return Jet{t, 0.0, 0.0};
                                          return Jet{x[static_cast<std::size_t>(slot)],
                                                     slot == k ? 1.0 : 0.0, 0.0};
                                        }).d1;
  }
}

double Expression::hessian_form(std::span<const double> x, double t, std::span<const double> a,
                                std::span<const double> b) const
{
  auto along = [&](double sign) {
    return run<Jet>([&](int slot) {
             if (slot < 0)
               return Jet{t, 0.0, 0.0};
             const auto i = static_cast<std::size_t>(slot);
             return Jet{x[i], a[i] + sign * b[i], 0.0};
           }).d2;
  };
  return 0.25 * (along(1.0) - along(-1.0));
}

double Expression::time_derivative(std::span<const double> x, double t) const
{
  return run<Jet>([&](int slot) {
           if (slot < 0)
             return Jet{t, 1.0, 0.0};
           return Jet{x[static_cast<std::size_t>(slot)], 0.0, 0.0};
         }).d1;
}

}  // namespace sweepkit::expr
