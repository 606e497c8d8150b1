#pragma once

// Scalar expression DSL used for frame coefficients and metric entries.
// Forward-mode dual numbers give exact first directional derivatives.

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhext {

// ---------------------------------------------------------------- dual numbers

struct Dual {
    double v = 0.0;  // value
    double d = 0.0;  // derivative along the chosen direction

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) {
    double q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
}
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual tan(Dual a) {
    double t = std::tan(a.v);
    return {t, (1.0 + t * t) * a.d};
}
inline Dual sqrt(Dual a) {
    double s = std::sqrt(a.v);
    return {s, a.d / (2.0 * s)};
}
inline Dual exp(Dual a) {
    double e = std::exp(a.v);
    return {e, e * a.d};
}
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
// derivative of |x| at 0 is defined as 0 (documented choice)
inline Dual abs(Dual a) {
    double s = a.v > 0 ? 1.0 : (a.v < 0 ? -1.0 : 0.0);
    return {std::fabs(a.v), s * a.d};
}

// ------------------------------------------------------------------ errors

struct ParseError : std::runtime_error {
    int line, column;
    std::string expected;
    ParseError(int ln, int col, const std::string& what, const std::string& exp)
        : std::runtime_error("parse error at " + std::to_string(ln) + ":" +
                             std::to_string(col) + ": " + what +
                             (exp.empty() ? "" : " (expected " + exp + ")")),
          line(ln), column(col), expected(exp) {}
};

struct UnknownFunction : ParseError {
    std::string name;
    UnknownFunction(int ln, int col, const std::string& fn)
        : ParseError(ln, col, "unknown function '" + fn + "'", ""), name(fn) {}
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnboundName : EvalError {
    std::string name;
    explicit UnboundName(const std::string& n)
        : EvalError("unbound name '" + n + "'"), name(n) {}
};
struct DomainError : EvalError {
    using EvalError::EvalError;
};

// ------------------------------------------------------------------ context

// Names resolve against coordinates first, then parameters. The optional
// direction vector (aligned with the coordinate list) seeds dual derivatives.
struct EvalContext {
    const std::vector<std::string>* coord_names = nullptr;
    const double* coords = nullptr;
    const double* direction = nullptr;  // may be null (derivative seeds = 0)
    const std::map<std::string, double>* params = nullptr;
};

// ------------------------------------------------------------------ expression

enum class ExprOp {
    Lit, Name, Add, Sub, Mul, Div, Neg, Pow,
    Sin, Cos, Tan, Sqrt, Abs, Exp, Ln
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprOp op;
    double value = 0.0;   // Lit
    std::string name;     // Name
    ExprPtr a, b;         // children
};

class Expr {
public:
    Expr() = default;

    static Expr parse(const std::string& text);

    static Expr lit(double v);
    static Expr name(const std::string& n);

    std::string str() const;

    double eval(const EvalContext& ctx) const;
    // (value, directional derivative); ctx.direction must be set.
    Dual eval_dual(const EvalContext& ctx) const;

    bool same_tree(const Expr& other) const;
    bool empty() const { return !node_; }
    const ExprNode* root() const { return node_.get(); }

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    static Expr call(ExprOp fn, const Expr& arg);
    static Expr pow(const Expr& base, const Expr& exponent);

    explicit Expr(ExprPtr n) : node_(std::move(n)) {}

private:
    ExprPtr node_;
};

}  // namespace nhext
