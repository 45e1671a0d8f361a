#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace refineq {

// Set while evaluating an expression whenever the evaluation leaves the
// reals: log of a nonpositive number, division by zero, sqrt of a negative
// number, 0^negative. The result of such an evaluation is NaN.
struct EvalDiag {
    bool domain_error = false;
};

enum class FuncId { Abs, Exp, Log, Sqrt, Sin, Cos, Tanh, Atan, Min, Max };

class ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

// Immutable AST for arithmetic expressions in a single free variable.
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := unary ("^" factor)?
//   unary  := "-" unary | atom
//   atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
//
// Note the grammar places unary minus below "^": "-x^2" parses as (-x)^2.
class ExprNode {
public:
    enum class Kind { Constant, Variable, Negate, Binary, Call };
    enum class BinOp { Add, Sub, Mul, Div, Pow };

    Kind kind = Kind::Constant;
    double value = 0.0;        // Constant
    BinOp op = BinOp::Add;     // Binary
    FuncId func = FuncId::Abs; // Call
    Expr lhs, rhs;             // Binary operands; Negate uses lhs
    std::vector<Expr> args;    // Call arguments
};

Expr make_const(double v);
Expr make_var();
Expr make_neg(Expr e);
Expr make_bin(ExprNode::BinOp op, Expr l, Expr r);
Expr make_call(FuncId f, std::vector<Expr> args);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

// Parses `src` with `var` as the only admissible identifier besides the
// fixed function set. Throws ParseError with the byte offset of the fault.
Expr parse_expression(std::string_view src, std::string_view var = "x");

// IEEE-754 binary64 evaluation, left-to-right, no re-association.
double eval_expression(const Expr& e, double x, EvalDiag* diag = nullptr);

// Prints with minimal parentheses such that parse(print(e)) == e structurally.
std::string print_expression(const Expr& e, std::string_view var = "x");

bool expr_equal(const Expr& a, const Expr& b);

// Replaces every variable node by `replacement` (expression composition).
Expr substitute(const Expr& e, const Expr& replacement);

// Numeric-affine detection: true when e evaluates as slope*x + intercept to
// within 1e-12 relative error on a fixed probe set.
bool is_affine(const Expr& e, double* slope = nullptr, double* intercept = nullptr);

} // namespace refineq
