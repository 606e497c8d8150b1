#include "nhext/dynamics.hpp"

namespace nhext {

namespace {

Vec spray_of(const ChristoffelTable& t, const Vec& v) {
    Vec F = Vec::Zero(t.n);
    for (int c = 0; c < t.n; ++c) {
        double s = 0.0;
        for (int al = 0; al < t.n; ++al)
            for (int be = 0; be < t.n; ++be) s += t(c, al, be) * v[al] * v[be];
        F[c] = -s;
    }
    return F;
}

// K^a_i = -g^{ab} g_{bi} from the metric's blocks at q
Mat k_matrix(const Mat& g, int m) {
    const int n = static_cast<int>(g.rows());
    Mat g_ab = g.topLeftCorner(m, m);
    Mat g_ai = g.topRightCorner(m, n - m);
    Eigen::LLT<Mat> llt(g_ab);
    if (llt.info() != Eigen::Success)
        throw SingularBlock("constrained metric block not positive-definite");
    return -llt.solve(g_ai);
}

}  // namespace

SodeEval geodesic_forces(const SystemSpec& spec, const QuasiState& state) {
    auto lc = levi_civita(spec, state.q);
    return {SprayKind::Geodesic, spray_of(lc, state.v)};
}

SodeEval nonholonomic_forces(const SystemSpec& spec, const Vec& q, const Vec& v_a) {
    const int m = spec.m;
    auto lc = levi_civita(spec, q);
    Vec F = Vec::Zero(spec.n());
    for (int b = 0; b < m; ++b) {
        double s = 0.0;
        for (int e = 0; e < m; ++e)
            for (int f = 0; f < m; ++f) s += lc(b, e, f) * v_a[e] * v_a[f];
        F[b] = -s;
    }
    return {SprayKind::Nonholonomic, F};
}

Vec multipliers(const SystemSpec& spec, const Vec& q, const Vec& v_a) {
    const int n = spec.n(), m = spec.m, k = n - m;
    auto lc = levi_civita(spec, q);
    Mat g = frame_metric_at(spec, q);
    Tensor3 R = bracket_coeffs(spec, q);

    Vec v = Vec::Zero(n);
    v.head(m) = v_a;
    Vec F_geo = spray_of(lc, v);

    Vec direct(k), cross(k);
    for (int i0 = 0; i0 < k; ++i0) {
        int i = m + i0;
        direct[i0] = -g.col(i).dot(F_geo);

        double t1 = 0.0, t2 = 0.0, t3 = 0.0;
        for (int k0 = 0; k0 < k; ++k0) {
            double q2 = 0.0;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) q2 += lc(m + k0, a, b) * v_a[a] * v_a[b];
            t1 += g(m + k0, i) * q2;
        }
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int d = 0; d < m; ++d) t2 += g(d, b) * R(d, a, i) * v_a[a] * v_a[b];
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) t3 += g(a, b) * R(a, i, c) * v_a[c] * v_a[b];
        cross[i0] = t1 + t2 + t3;
    }
    double resid = (direct - cross).norm();
    if (resid > 1e-9 * std::max(1.0, direct.norm())) throw ConsistencyError(resid);
    return direct;
}

SodeEval projected_forces(const SystemSpec& spec, const MetricField& ghat,
                          const QuasiState& state) {
    const int n = spec.n(), m = spec.m;
    auto lc = levi_civita(spec, ghat, state.q);
    Vec F = spray_of(lc, state.v);
    Mat K = k_matrix(ghat.at(state.q), m);
    Vec out = Vec::Zero(n);
    for (int a = 0; a < m; ++a) {
        out[a] = F[a];
        for (int i0 = 0; i0 < n - m; ++i0) out[a] -= K(a, i0) * F[m + i0];
    }
    return {SprayKind::ExtProjection, out};
}

SodeEval extension_forces(const SystemSpec& spec, const QuasiState& state, SprayKind kind) {
    switch (kind) {
        case SprayKind::ExtProjection:
            return projected_forces(spec, base_metric(spec), state);
        case SprayKind::ExtNhConnection:
            return {kind, spray_of(nonholonomic_connection(spec, state.q), state.v)};
        case SprayKind::ExtBarred:
            return {kind, spray_of(barred_connection(spec, state.q), state.v)};
        default:
            throw std::invalid_argument("extension_forces: not an extension kind");
    }
}

SodeEval extension_geodesic_forces(const SystemSpec& spec, const MetricField& ghat,
                                   const QuasiState& state) {
    auto lc = levi_civita(spec, ghat, state.q);
    return {SprayKind::GeodesicOfExtension, spray_of(lc, state.v)};
}

std::pair<Vec, Vec> nh_flow_step(const SystemSpec& spec, const Vec& q, const Vec& v_a, double h) {
    const int m = spec.m;
    auto rhs = [&](const Vec& qq, const Vec& vv) {
        Mat A = frame_matrix(spec, qq);
        Vec qdot = A.leftCols(m) * vv;
        Vec vdot = nonholonomic_forces(spec, qq, vv).F.head(m);
        return std::make_pair(qdot, vdot);
    };
    auto [k1q, k1v] = rhs(q, v_a);
    auto [k2q, k2v] = rhs(q + 0.5 * h * k1q, v_a + 0.5 * h * k1v);
    auto [k3q, k3v] = rhs(q + 0.5 * h * k2q, v_a + 0.5 * h * k2v);
    auto [k4q, k4v] = rhs(q + h * k3q, v_a + h * k3v);
    return {q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
            v_a + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

double flow_derivative(const SystemSpec& spec,
                       const std::function<double(const Vec&, const Vec&)>& phi, const Vec& q,
                       const Vec& v_a, double h) {
    auto [qp, vp] = nh_flow_step(spec, q, v_a, h);
    auto [qm, vm] = nh_flow_step(spec, q, v_a, -h);
    return (phi(qp, vp) - phi(qm, vm)) / (2.0 * h);
}

}  // namespace nhext
