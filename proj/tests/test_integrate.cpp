#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nhext/integrate.hpp"
#include "nhext/systems.hpp"

using namespace nhext;

namespace {

SystemSpec euclidean3() {
    SystemSpec s;
    s.coords = {"x", "y", "z"};
    s.m = 2;
    s.frame = {{Expr::parse("1"), Expr::parse("0"), Expr::parse("0")},
               {Expr::parse("0"), Expr::parse("1"), Expr::parse("0")},
               {Expr::parse("0"), Expr::parse("0"), Expr::parse("1")}};
    s.metric_kind = MetricKind::Coordinate;
    s.metric = {{Expr::parse("1"), Expr::parse("0"), Expr::parse("0")},
                {Expr::parse("0"), Expr::parse("1"), Expr::parse("0")},
                {Expr::parse("0"), Expr::parse("0"), Expr::parse("1")}};
    s.validate();
    return s;
}

}  // namespace

TEST_CASE("free particle goes straight") {
    auto s = euclidean3();
    Vec q0(3), v0(3);
    q0 << 0.1, -0.2, 0.0;
    v0 << 0.3, 0.1, -0.2;
    auto traj = integrate(s, SprayKind::Geodesic, {q0, v0}, 1.0, 1e-3);
    for (size_t i = 0; i < traj.t.size(); ++i) {
        CHECK((traj.states[i].q - (q0 + traj.t[i] * v0)).norm() < 1e-12);
        CHECK((traj.states[i].v - v0).norm() < 1e-12);
    }
}

TEST_CASE("disk center of mass traces a closed circle") {
    auto s = builtin("disk");
    Vec q0 = Vec::Zero(4), v0 = Vec::Zero(4);
    v0 << 1.0, 1.0, 0.0, 0.0;  // v_theta = v_phi = 1
    auto traj = integrate(s, SprayKind::Nonholonomic, {q0, v0}, 2.0 * M_PI, 1e-3);
    Vec qe = traj.states.back().q;
    CHECK(std::fabs(qe[0] - q0[0]) < 1e-6);
    CHECK(std::fabs(qe[1] - q0[1]) < 1e-6);
    // quarter turn: x = sin t, y = 1 - cos t
    size_t quarter = traj.t.size() / 4;
    CHECK(traj.states[quarter].q[0] == doctest::Approx(std::sin(traj.t[quarter])).epsilon(1e-6));
    CHECK(traj.states[quarter].q[1] ==
          doctest::Approx(1.0 - std::cos(traj.t[quarter])).epsilon(1e-6));
}

TEST_CASE("RK4 self-convergence order on the carriage") {
    auto s = builtin("carriage");
    Vec q0(5), v0 = Vec::Zero(5);
    q0 << 0.1, -0.2, 0.4, 0.0, 0.0;
    v0 << 0.9, -0.4, 0.0, 0.0, 0.0;
    auto endpoint = [&](double dt) {
        return integrate(s, SprayKind::Nonholonomic, {q0, v0}, 0.5, dt).states.back().q;
    };
    Vec ref = endpoint(4e-3);
    double e1 = (endpoint(3.2e-2) - ref).norm();
    double e2 = (endpoint(1.6e-2) - ref).norm();
    double rate = std::log2(e1 / e2);
    CHECK(rate > 3.7);
    CHECK(rate < 4.3);
}

TEST_CASE("energy conservation along nonholonomic trajectories") {
    for (const char* name : {"disk", "carriage"}) {
        auto s = builtin(name);
        Vec q0 = Vec::Zero(s.n()), v0 = Vec::Zero(s.n());
        q0[0] = 0.1;
        v0[0] = 0.8;
        v0[1] = -0.5;
        auto traj = integrate(s, SprayKind::Nonholonomic, {q0, v0}, 1.0, 1e-3);
        double e0 = traj.energy.front();
        for (double e : traj.energy) CHECK(std::fabs(e - e0) < 1e-8);
        for (double d : traj.vperp_norm) CHECK(d == 0.0);
    }
}

TEST_CASE("extension kinds preserve the constraint submanifold") {
    auto s = builtin("carriage");
    Vec q0 = Vec::Zero(5), v0 = Vec::Zero(5);
    q0 << 0.1, 0.0, 0.3, 0.0, 0.0;
    v0 << 0.6, -0.2, 0.0, 0.0, 0.0;
    for (auto kind : {SprayKind::ExtProjection, SprayKind::ExtNhConnection, SprayKind::ExtBarred}) {
        auto traj = integrate(s, kind, {q0, v0}, 1.0, 1e-3);
        double dt = traj.dt;
        for (double d : traj.vperp_norm) CHECK(d < 10.0 * dt * dt);
        // and the constrained motion matches the nonholonomic trajectory
        auto nh = integrate(s, SprayKind::Nonholonomic, {q0, v0}, 1.0, 1e-3);
        CHECK((traj.states.back().q - nh.states.back().q).norm() < 1e-9);
    }
}

TEST_CASE("exponential map basics") {
    auto s = builtin("disk");
    Vec q(4);
    q << 0.2, -0.1, 0.5, 0.8;
    Vec zero = Vec::Zero(2);
    CHECK((nh_exp(s, q, zero) - q).norm() < 1e-12);
    Mat E0 = tangent_exp(s, q, zero);
    CHECK((E0.topRows(2) - Mat::Identity(2, 2)).norm() < 1e-8);
    CHECK(E0.bottomRows(2).norm() < 1e-8);

    // homogeneity: exp(t v) equals the time-t point of the flow of v
    Vec v(2);
    v << 0.7, -0.4;
    Vec vfull = Vec::Zero(4);
    vfull.head(2) = v;
    auto traj = integrate(s, SprayKind::Nonholonomic, {q, vfull}, 1.0, 1e-3);
    for (double tt : {0.25, 0.5, 1.0}) {
        Vec via_exp = nh_exp(s, q, tt * v);
        size_t idx = static_cast<size_t>(std::llround(tt / 1e-3));
        CHECK((via_exp - traj.states[idx].q).norm() < 1e-8);
    }
}

TEST_CASE("tangent map derivative structure at the origin") {
    auto s = builtin("disk");
    Vec q(4);
    q << 0.2, -0.1, 0.5, 0.8;
    Tensor3 R = bracket_coeffs(s, q);
    auto lc = levi_civita(s, q);
    const double eps = 1e-3;
    for (int b = 0; b < 2; ++b) {
        Vec vp = Vec::Zero(2), vm = Vec::Zero(2);
        vp[b] = eps;
        vm[b] = -eps;
        Mat dE = (tangent_exp(s, q, vp) - tangent_exp(s, q, vm)) / (2.0 * eps);
        for (int a = 0; a < 2; ++a) {
            for (int i = 2; i < 4; ++i)
                CHECK(dE(i, a) == doctest::Approx(0.5 * R(i, a, b)).epsilon(1e-4).scale(1.0));
            for (int d = 0; d < 2; ++d) {
                double want = 0.5 * R(d, a, b) - 0.5 * (lc(d, a, b) + lc(d, b, a));
                CHECK(dE(d, a) == doctest::Approx(want).epsilon(1e-4).scale(1.0));
            }
        }
    }
}

TEST_CASE("parallel transport invariants") {
    auto s = builtin("disk");
    Vec q0 = Vec::Zero(4), v0 = Vec::Zero(4);
    q0 << 0.1, 0.0, 0.2, 0.3;
    v0 << 0.8, 0.6, 0.0, 0.0;
    auto traj = integrate(s, SprayKind::Nonholonomic, {q0, v0}, 1.0, 1e-3);

    Vec w(4);
    w << 0.3, -0.2, 0.5, 0.4;
    auto lcts = transport(s, ConnectionKind::LeviCivita, traj, w);
    double n0 = w.dot(frame_metric_at(s, q0) * w);
    for (size_t i = 0; i < lcts.W.size(); ++i) {
        const Vec& qq = traj.states[i].q;
        CHECK(std::fabs(lcts.W[i].dot(frame_metric_at(s, qq) * lcts.W[i]) - n0) < 1e-8);
    }

    // barred transport keeps the orthogonal complement invariant
    Vec wi(4);
    wi << 0.0, 0.0, 0.7, -0.4;
    auto bts = transport(s, ConnectionKind::Barred, traj, wi);
    for (const Vec& W : bts.W) CHECK(W.head(2).norm() < 1e-9);
}

TEST_CASE("covector transport with zero source stays zero") {
    auto s = euclidean3();
    Vec q0 = Vec::Zero(3), v0 = Vec::Zero(3);
    v0 << 0.4, -0.3, 0.0;
    auto traj = integrate(s, SprayKind::Nonholonomic, {q0, v0}, 1.0, 1e-2);
    Vec w = Vec::Zero(3);
    w[2] = 1.0;
    Vec h0 = Vec::Zero(3);
    auto ts = transport(s, ConnectionKind::Barred, traj, w, &h0);
    for (const Vec& h : ts.h) CHECK(h.norm() < 1e-12);
}

TEST_CASE("gauss checks on trivial input") {
    auto s = euclidean3();
    auto gf = base_metric(s);
    Vec q = Vec::Zero(3);
    Vec v(2), u(2);
    v << 0.0, 0.0;
    u << 0.3, 0.1;
    CHECK(gauss_check_A(s, gf, q, v, u) == 0.0);
    v << 0.2, -0.1;
    CHECK(gauss_check_A(s, gf, q, v, u) < 1e-9);
    Vec w = Vec::Zero(3);
    w[2] = 0.8;
    CHECK(gauss_check_B(s, gf, q, v, w, 1.0, 1e-2) < 1e-10);
}

TEST_CASE("comparison rejects velocities off the distribution") {
    auto s = builtin("disk");
    auto gf = base_metric(s);
    Vec q0 = Vec::Zero(4);
    Vec bad = Vec::Zero(4);
    bad << 0.5, 0.5, 0.1, 0.0;
    CHECK_THROWS_AS(compare(s, gf, q0, bad, 0.1, 1e-2), std::invalid_argument);
}
