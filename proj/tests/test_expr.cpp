#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nhext/expr.hpp"

using namespace nhext;

namespace {

EvalContext ctx_of(const std::vector<std::string>& names, const double* q,
                   const std::map<std::string, double>& params,
                   const double* dir = nullptr) {
    EvalContext c;
    c.coord_names = &names;
    c.coords = q;
    c.params = &params;
    c.direction = dir;
    return c;
}

}  // namespace

TEST_CASE("parse shapes") {
    // R*cos(phi) is a product of a name and a cosine call
    Expr e = Expr::parse("R*cos(phi)");
    Expr want = Expr::name("R") * Expr::call(ExprOp::Cos, Expr::name("phi"));
    CHECK(e.same_tree(want));

    // precedence: 1/(2*c)
    Expr f = Expr::parse("1/(2*c)");
    Expr wf = Expr::lit(1) / (Expr::lit(2) * Expr::name("c"));
    CHECK(f.same_tree(wf));

    // unary minus binds below ^
    Expr g = Expr::parse("-x^2");
    Expr wg = -Expr::pow(Expr::name("x"), Expr::lit(2));
    CHECK(g.same_tree(wg));

    Expr h = Expr::parse("-(R^2)/(2*c)*sin(theta)");
    Expr wh = (-Expr::pow(Expr::name("R"), Expr::lit(2))) / (Expr::lit(2) * Expr::name("c")) *
              Expr::call(ExprOp::Sin, Expr::name("theta"));
    CHECK(h.same_tree(wh));
}

TEST_CASE("parse errors are positioned") {
    CHECK_THROWS_AS(Expr::parse("1+"), ParseError);
    CHECK_THROWS_AS(Expr::parse("foo(3)"), UnknownFunction);
    CHECK_THROWS_AS(Expr::parse("(1+2"), ParseError);
    CHECK_THROWS_AS(Expr::parse("1 2"), ParseError);
    try {
        Expr::parse("1+\n *2");
    } catch (const ParseError& pe) {
        CHECK(pe.line == 2);
    }
}

TEST_CASE("eval basics") {
    std::vector<std::string> names{"phi"};
    std::map<std::string, double> params{{"R", 1.0}};
    double q[1] = {0.0};
    auto ctx = ctx_of(names, q, params);

    CHECK(Expr::parse("R*cos(phi)").eval(ctx) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(Expr::parse("3/2").eval(ctx) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_THROWS_AS(Expr::parse("zz+1").eval(ctx), UnboundName);
    CHECK_THROWS_AS(Expr::parse("sqrt(0-1)").eval(ctx), DomainError);
    CHECK_THROWS_AS(Expr::parse("1/phi").eval(ctx), DomainError);
    CHECK_THROWS_AS(Expr::parse("ln(0)").eval(ctx), DomainError);
}

TEST_CASE("dual derivatives, pinned cases") {
    std::vector<std::string> names{"phi", "y"};
    std::map<std::string, double> params;
    double q[2] = {M_PI / 2, 3.0};

    double dir_phi[2] = {1.0, 0.0};
    auto c1 = ctx_of(names, q, params, dir_phi);
    Dual d1 = Expr::parse("cos(phi)").eval_dual(c1);
    CHECK(d1.v == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d1.d == doctest::Approx(-1.0).epsilon(1e-15));

    double dir_y[2] = {0.0, 1.0};
    auto c2 = ctx_of(names, q, params, dir_y);
    Dual d2 = Expr::parse("y^2").eval_dual(c2);
    CHECK(d2.v == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(d2.d == doctest::Approx(6.0).epsilon(1e-15));

    // abs'(0) := 0 by convention
    double q0[2] = {0.0, 0.0};
    auto c3 = ctx_of(names, q0, params, dir_y);
    CHECK(Expr::parse("abs(y)").eval_dual(c3).d == 0.0);
}

namespace {

// random expression generator for property checks
Expr random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
    switch (pick(rng)) {
        case 0: {
            std::uniform_real_distribution<double> u(0.1, 3.0);
            return Expr::lit(u(rng));
        }
        case 1: {
            std::uniform_int_distribution<int> v(0, 1);
            return Expr::name(v(rng) ? "x" : "y");
        }
        case 2: return random_expr(rng, depth - 1) + random_expr(rng, depth - 1);
        case 3: return random_expr(rng, depth - 1) - random_expr(rng, depth - 1);
        case 4: return random_expr(rng, depth - 1) * random_expr(rng, depth - 1);
        case 5: return -random_expr(rng, depth - 1);
        case 6: return Expr::call(ExprOp::Sin, random_expr(rng, depth - 1));
        case 7: return Expr::call(ExprOp::Cos, random_expr(rng, depth - 1));
        default: {
            std::uniform_int_distribution<int> p(1, 3);
            return Expr::pow(random_expr(rng, depth - 1), Expr::lit(p(rng)));
        }
    }
}

}  // namespace

TEST_CASE("round-trip parse(print) is the identity, random trees") {
    std::mt19937_64 rng(20240817);
    for (int i = 0; i < 200; ++i) {
        Expr e = random_expr(rng, 4);
        Expr back = Expr::parse(e.str());
        CHECK(back.same_tree(e));
        CHECK(back.str() == e.str());
    }
}

TEST_CASE("dual vs central finite differences, random trees") {
    std::mt19937_64 rng(987654321);
    std::vector<std::string> names{"x", "y"};
    std::map<std::string, double> params;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Expr e = random_expr(rng, 4);
        double q[2] = {u(rng), u(rng)};
        double dir[2] = {u(rng), u(rng)};
        auto cd = ctx_of(names, q, params, dir);
        Dual d = e.eval_dual(cd);

        const double h = 1e-6;
        double qp[2] = {q[0] + h * dir[0], q[1] + h * dir[1]};
        double qm[2] = {q[0] - h * dir[0], q[1] - h * dir[1]};
        double fp = e.eval(ctx_of(names, qp, params));
        double fm = e.eval(ctx_of(names, qm, params));
        double fd = (fp - fm) / (2 * h);
        double scale = std::max({1.0, std::fabs(d.d), std::fabs(d.v)});
        CHECK(std::fabs(d.d - fd) / scale < 1e-5);
    }
}

TEST_CASE("linearity in the direction and Leibniz") {
    std::mt19937_64 rng(13);
    std::vector<std::string> names{"x", "y"};
    std::map<std::string, double> params;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Expr e1 = random_expr(rng, 3), e2 = random_expr(rng, 3);
        double q[2] = {u(rng), u(rng)};
        double d1[2] = {u(rng), u(rng)}, d2[2] = {u(rng), u(rng)};
        double a = u(rng), b = u(rng);
        double dsum[2] = {a * d1[0] + b * d2[0], a * d1[1] + b * d2[1]};

        double g1 = e1.eval_dual(ctx_of(names, q, params, d1)).d;
        double g2 = e1.eval_dual(ctx_of(names, q, params, d2)).d;
        double gs = e1.eval_dual(ctx_of(names, q, params, dsum)).d;
        CHECK(std::fabs(gs - (a * g1 + b * g2)) <=
              1e-12 * std::max(1.0, std::fabs(gs)));

        Dual v1 = e1.eval_dual(ctx_of(names, q, params, d1));
        Dual v2 = e2.eval_dual(ctx_of(names, q, params, d1));
        Dual prod = (e1 * e2).eval_dual(ctx_of(names, q, params, d1));
        double want = v1.v * v2.d + v2.v * v1.d;
        CHECK(std::fabs(prod.d - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
    }
}

TEST_CASE("bit-for-bit deterministic evaluation") {
    Expr e = Expr::parse("sin(x)*cos(y)+x^3/(2+y)");
    std::vector<std::string> names{"x", "y"};
    std::map<std::string, double> params;
    double q[2] = {0.37, -1.21};
    auto ctx = ctx_of(names, q, params);
    double first = e.eval(ctx);
    for (int i = 0; i < 10; ++i) CHECK(e.eval(ctx) == first);
}
