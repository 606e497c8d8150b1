#include "nhext/expr.hpp"

#include <charconv>
#include <cstdlib>

namespace nhext {

// ----------------------------------------------------------------- building

static ExprPtr mk(ExprOp op, ExprPtr a = nullptr, ExprPtr b = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

Expr Expr::lit(double v) {
    // negative literals print as "-x" which re-parses as Neg(x); build that
    // shape directly so parse∘print stays the identity on programmatic trees
    if (std::signbit(v)) return -lit(-v);
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Lit;
    n->value = v;
    return Expr{n};
}

Expr Expr::name(const std::string& nm) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Name;
    n->name = nm;
    return Expr{n};
}

Expr operator+(const Expr& a, const Expr& b) { return Expr{mk(ExprOp::Add, a.node_, b.node_)}; }
Expr operator-(const Expr& a, const Expr& b) { return Expr{mk(ExprOp::Sub, a.node_, b.node_)}; }
Expr operator*(const Expr& a, const Expr& b) { return Expr{mk(ExprOp::Mul, a.node_, b.node_)}; }
Expr operator/(const Expr& a, const Expr& b) { return Expr{mk(ExprOp::Div, a.node_, b.node_)}; }
Expr operator-(const Expr& a) { return Expr{mk(ExprOp::Neg, a.node_)}; }
Expr Expr::call(ExprOp fn, const Expr& arg) { return Expr{mk(fn, arg.node_)}; }
Expr Expr::pow(const Expr& base, const Expr& e) { return Expr{mk(ExprOp::Pow, base.node_, e.node_)}; }

bool Expr::same_tree(const Expr& other) const {
    auto eq = [](auto&& self, const ExprNode* x, const ExprNode* y) -> bool {
        if (!x || !y) return x == y;
        if (x->op != y->op) return false;
        switch (x->op) {
            case ExprOp::Lit:  return x->value == y->value;
            case ExprOp::Name: return x->name == y->name;
            default: break;
        }
        return self(self, x->a.get(), y->a.get()) && self(self, x->b.get(), y->b.get());
    };
    return eq(eq, node_.get(), other.node_.get());
}

// ----------------------------------------------------------------- evaluation

namespace {

template <class T>
T lookup(const EvalContext& ctx, const std::string& nm);

template <>
double lookup<double>(const EvalContext& ctx, const std::string& nm) {
    if (ctx.coord_names) {
        for (size_t i = 0; i < ctx.coord_names->size(); ++i)
            if ((*ctx.coord_names)[i] == nm) return ctx.coords[i];
    }
    if (ctx.params) {
        auto it = ctx.params->find(nm);
        if (it != ctx.params->end()) return it->second;
    }
    throw UnboundName(nm);
}

template <>
Dual lookup<Dual>(const EvalContext& ctx, const std::string& nm) {
    if (ctx.coord_names) {
        for (size_t i = 0; i < ctx.coord_names->size(); ++i)
            if ((*ctx.coord_names)[i] == nm)
                return {ctx.coords[i], ctx.direction ? ctx.direction[i] : 0.0};
    }
    if (ctx.params) {
        auto it = ctx.params->find(nm);
        if (it != ctx.params->end()) return {it->second, 0.0};
    }
    throw UnboundName(nm);
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

// double counterparts of the Dual math functions, so eval_rec<T> resolves both
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double abs(double x) { return std::fabs(x); }

double pow_impl(double base, double e) {
    if (base == 0.0 && e < 0.0) throw DomainError("0 raised to a negative power");
    if (base < 0.0 && e != std::floor(e))
        throw DomainError("negative base with non-integer exponent");
    return std::pow(base, e);
}

Dual pow_impl(const Dual& base, const Dual& e) {
    if (e.d == 0.0 && e.v == std::floor(e.v)) {
        // integer exponent: d(u^n) = n u^(n-1) u'
        double p = pow_impl(base.v, e.v);
        double dp = base.v == 0.0
                        ? (e.v == 1.0 ? e.v * base.d : 0.0)
                        : e.v * p / base.v * base.d;
        return {p, dp};
    }
    if (base.v <= 0.0) throw DomainError("non-positive base with variable exponent");
    double p = std::pow(base.v, e.v);
    return {p, p * (e.d * std::log(base.v) + e.v * base.d / base.v)};
}

template <class T>
T eval_rec(const ExprNode* n, const EvalContext& ctx) {
    switch (n->op) {
        case ExprOp::Lit:  return T(n->value);
        case ExprOp::Name: return lookup<T>(ctx, n->name);
        case ExprOp::Add:  return eval_rec<T>(n->a.get(), ctx) + eval_rec<T>(n->b.get(), ctx);
        case ExprOp::Sub:  return eval_rec<T>(n->a.get(), ctx) - eval_rec<T>(n->b.get(), ctx);
        case ExprOp::Mul:  return eval_rec<T>(n->a.get(), ctx) * eval_rec<T>(n->b.get(), ctx);
        case ExprOp::Div: {
            T num = eval_rec<T>(n->a.get(), ctx), den = eval_rec<T>(n->b.get(), ctx);
            if (value_of(den) == 0.0) throw DomainError("division by zero");
            return num / den;
        }
        case ExprOp::Neg:  return -eval_rec<T>(n->a.get(), ctx);
        case ExprOp::Pow:  return pow_impl(eval_rec<T>(n->a.get(), ctx),
                                           eval_rec<T>(n->b.get(), ctx));
        case ExprOp::Sin:  return sin(eval_rec<T>(n->a.get(), ctx));
        case ExprOp::Cos:  return cos(eval_rec<T>(n->a.get(), ctx));
        case ExprOp::Tan:  return tan(eval_rec<T>(n->a.get(), ctx));
        case ExprOp::Sqrt: {
            T x = eval_rec<T>(n->a.get(), ctx);
            if (value_of(x) < 0.0) throw DomainError("sqrt of negative");
            return sqrt(x);
        }
        case ExprOp::Abs:  return abs(eval_rec<T>(n->a.get(), ctx));
        case ExprOp::Exp:  return exp(eval_rec<T>(n->a.get(), ctx));
        case ExprOp::Ln: {
            T x = eval_rec<T>(n->a.get(), ctx);
            if (value_of(x) <= 0.0) throw DomainError("ln of non-positive");
            return log(x);
        }
    }
    throw EvalError("corrupt expression node");
}

}  // namespace

double Expr::eval(const EvalContext& ctx) const {
    if (!node_) throw EvalError("empty expression");
    return eval_rec<double>(node_.get(), ctx);
}

Dual Expr::eval_dual(const EvalContext& ctx) const {
    if (!node_) throw EvalError("empty expression");
    return eval_rec<Dual>(node_.get(), ctx);
}

// ----------------------------------------------------------------- printing

namespace {

int prec_of(const ExprNode* n) {
    switch (n->op) {
        case ExprOp::Add: case ExprOp::Sub: return 1;
        case ExprOp::Mul: case ExprOp::Div: return 2;
        case ExprOp::Neg: return 3;
        case ExprOp::Pow: return 4;
        default: return 5;  // atoms and function calls
    }
}

void print_rec(const ExprNode* n, std::string& out);

void print_child(const ExprNode* c, std::string& out, bool parens) {
    if (parens) out += '(';
    print_rec(c, out);
    if (parens) out += ')';
}

void print_rec(const ExprNode* n, std::string& out) {
    switch (n->op) {
        case ExprOp::Lit: {
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, n->value);
            out.append(buf, p);
            return;
        }
        case ExprOp::Name: out += n->name; return;
        case ExprOp::Add:
        case ExprOp::Sub: {
            print_child(n->a.get(), out, prec_of(n->a.get()) < 1);
            out += n->op == ExprOp::Add ? "+" : "-";
            print_child(n->b.get(), out, prec_of(n->b.get()) <= 1);
            return;
        }
        case ExprOp::Mul:
        case ExprOp::Div: {
            print_child(n->a.get(), out, prec_of(n->a.get()) < 2);
            out += n->op == ExprOp::Mul ? "*" : "/";
            print_child(n->b.get(), out, prec_of(n->b.get()) <= 2);
            return;
        }
        case ExprOp::Neg:
            out += '-';
            print_child(n->a.get(), out, prec_of(n->a.get()) < 3);
            return;
        case ExprOp::Pow:
            print_child(n->a.get(), out, prec_of(n->a.get()) < 5);
            out += '^';
            // the exponent re-parses at unary-minus level, so Neg and Pow are safe bare
            print_child(n->b.get(), out, prec_of(n->b.get()) <= 2);
            return;
        case ExprOp::Sin:  out += "sin";  break;
        case ExprOp::Cos:  out += "cos";  break;
        case ExprOp::Tan:  out += "tan";  break;
        case ExprOp::Sqrt: out += "sqrt"; break;
        case ExprOp::Abs:  out += "abs";  break;
        case ExprOp::Exp:  out += "exp";  break;
        case ExprOp::Ln:   out += "ln";   break;
    }
    out += '(';
    print_rec(n->a.get(), out);
    out += ')';
}

}  // namespace

std::string Expr::str() const {
    std::string out;
    if (node_) print_rec(node_.get(), out);
    return out;
}

// ----------------------------------------------------------------- parser

namespace {

struct Lexer {
    const std::string& s;
    size_t pos = 0;
    int line = 1, col = 1;

    explicit Lexer(const std::string& text) : s(text) {}

    [[noreturn]] void fail(const std::string& what, const std::string& expected) {
        throw ParseError(line, col, what, expected);
    }

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' ||
                                  s[pos] == '\n' || s[pos] == '\r')) {
            if (s[pos] == '\n') { ++line; col = 1; } else ++col;
            ++pos;
        }
    }

    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }

    void bump(size_t n = 1) { pos += n; col += static_cast<int>(n); }

    bool accept(char c) {
        if (peek() == c) { bump(); return true; }
        return false;
    }

    void expect(char c) {
        if (!accept(c))
            fail(pos < s.size() ? std::string("unexpected '") + s[pos] + "'"
                                : "unexpected end of input",
                 std::string("'") + c + "'");
    }

    double number() {
        skip_ws();
        const char* begin = s.data() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number", "digits");
        bump(static_cast<size_t>(end - begin));
        return v;
    }

    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
            bump();
        return s.substr(start, pos - start);
    }
};

struct Parser {
    Lexer lx;
    explicit Parser(const std::string& text) : lx(text) {}

    Expr expression() {
        Expr e = term();
        for (;;) {
            if (lx.accept('+')) e = e + term();
            else if (lx.accept('-')) e = e - term();
            else return e;
        }
    }

    Expr term() {
        Expr e = factor();
        for (;;) {
            if (lx.accept('*')) e = e * factor();
            else if (lx.accept('/')) e = e / factor();
            else return e;
        }
    }

    // unary minus binds below ^ : -x^2 is -(x^2)
    Expr factor() {
        if (lx.accept('-')) return -factor();
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (lx.accept('^')) return Expr::pow(base, factor());
        return base;
    }

    Expr atom() {
        char c = lx.peek();
        if (c == '(') {
            lx.bump();
            Expr e = expression();
            lx.expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return Expr::lit(lx.number());
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            int ln = lx.line, col = lx.col;
            std::string id = lx.ident();
            if (lx.peek() == '(') {
                ExprOp fn;
                if (id == "sin") fn = ExprOp::Sin;
                else if (id == "cos") fn = ExprOp::Cos;
                else if (id == "tan") fn = ExprOp::Tan;
                else if (id == "sqrt") fn = ExprOp::Sqrt;
                else if (id == "abs") fn = ExprOp::Abs;
                else if (id == "exp") fn = ExprOp::Exp;
                else if (id == "ln") fn = ExprOp::Ln;
                else throw UnknownFunction(ln, col, id);
                lx.bump();
                Expr arg = expression();
                lx.expect(')');
                return Expr::call(fn, arg);
            }
            return Expr::name(id);
        }
        lx.fail(c == '\0' ? "unexpected end of input"
                          : std::string("unexpected '") + c + "'",
                "number, name or '('");
    }
};

}  // namespace

Expr Expr::parse(const std::string& text) {
    Parser p(text);
    Expr e = p.expression();
    if (p.lx.peek() != '\0')
        p.lx.fail(std::string("trailing input '") + p.lx.peek() + "'", "end of input");
    return e;
}

}  // namespace nhext
