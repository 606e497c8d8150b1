#include "nhext/integrate.hpp"

#include <cmath>
#include <fstream>

namespace nhext {

namespace {

Vec forces_for(const SystemSpec& spec, SprayKind kind, const QuasiState& st,
               const MetricField* ghat) {
    switch (kind) {
        case SprayKind::Geodesic:
            return geodesic_forces(spec, st).F;
        case SprayKind::Nonholonomic:
            return nonholonomic_forces(spec, st.q, st.v.head(spec.m)).F;
        case SprayKind::GeodesicOfExtension:
            if (!ghat) throw std::invalid_argument("GeodesicOfExtension needs a metric field");
            return extension_geodesic_forces(spec, *ghat, st).F;
        default:
            return extension_forces(spec, st, kind).F;
    }
}

void check_state(const SystemSpec& spec, const Vec& q, const Vec& v, double t) {
    if (!q.allFinite() || !v.allFinite()) throw NonFiniteState(t);
    // the box is a sampling domain, not a hard wall: angles are allowed to
    // wind, so only flag states far outside it
    for (int i = 0; i < spec.n(); ++i) {
        double lo = spec.box.range[i][0], hi = spec.box.range[i][1];
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        if (std::fabs(q[i] - mid) > 10.0 * half + 1.0) throw LeftChartBox(t);
    }
}

}  // namespace

Trajectory integrate(const SystemSpec& spec, SprayKind kind, const QuasiState& state0,
                     double t_end, double dt, const MetricField* ghat) {
    const int n = spec.n();
    if (state0.q.size() != n || state0.v.size() != n)
        throw std::invalid_argument("integrate: state dimension mismatch");
    auto rhs = [&](const Vec& q, const Vec& v) {
        Vec qdot = frame_matrix(spec, q) * v;
        Vec vdot = forces_for(spec, kind, {q, v}, ghat);
        return std::make_pair(qdot, vdot);
    };
    auto metric_at = [&](const Vec& q) {
        return ghat ? ghat->at(q) : frame_metric_at(spec, q);
    };

    // land exactly on t_end: keep the requested step as an upper bound
    const int steps = std::max(1, static_cast<int>(std::ceil(t_end / dt - 1e-9)));
    dt = t_end / steps;
    Trajectory traj;
    traj.kind = kind;
    traj.dt = dt;
    traj.t.reserve(steps + 1);
    traj.states.reserve(steps + 1);

    Vec q = state0.q, v = state0.v;
    for (int s = 0; s <= steps; ++s) {
        double t = (s == steps) ? t_end : s * dt;
        check_state(spec, q, v, t);
        traj.t.push_back(t);
        traj.states.push_back({q, v});
        traj.energy.push_back(0.5 * v.dot(metric_at(q) * v));
        traj.vperp_norm.push_back(v.tail(spec.k()).norm());
        if (s == steps) break;
        auto [k1q, k1v] = rhs(q, v);
        auto [k2q, k2v] = rhs(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v);
        auto [k3q, k3v] = rhs(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v);
        auto [k4q, k4v] = rhs(q + dt * k3q, v + dt * k3v);
        q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        v += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    return traj;
}

ComparisonReport compare(const SystemSpec& spec, const MetricField& ghat, const Vec& q0,
                         const Vec& v0_in_D, double t_end, double dt) {
    const int n = spec.n(), m = spec.m;
    Vec v0 = Vec::Zero(n);
    if (v0_in_D.size() == m)
        v0.head(m) = v0_in_D;
    else if (v0_in_D.size() == n) {
        if (v0_in_D.tail(n - m).norm() > 1e-12)
            throw std::invalid_argument("compare: initial velocity not in the distribution");
        v0 = v0_in_D;
    } else
        throw std::invalid_argument("compare: bad velocity size");

    Trajectory nh = integrate(spec, SprayKind::Nonholonomic, {q0, v0}, t_end, dt);
    Trajectory geo = integrate(spec, SprayKind::GeodesicOfExtension, {q0, v0}, t_end, dt, &ghat);
    ComparisonReport rep;
    for (size_t s = 0; s < nh.states.size(); ++s) {
        rep.max_config_dev =
            std::max(rep.max_config_dev, (nh.states[s].q - geo.states[s].q).norm());
        rep.max_velocity_dev =
            std::max(rep.max_velocity_dev, (nh.states[s].v - geo.states[s].v).norm());
    }
    return rep;
}

Vec nh_exp(const SystemSpec& spec, const Vec& q, const Vec& v_in_D, double dt) {
    Vec v0 = Vec::Zero(spec.n());
    v0.head(spec.m) = v_in_D;
    return integrate(spec, SprayKind::Nonholonomic, {q, v0}, 1.0, dt).states.back().q;
}

Mat tangent_exp(const SystemSpec& spec, const Vec& q, const Vec& v_in_D, double dt) {
    const int n = spec.n(), m = spec.m;
    double h = 1e-5 * std::max(1.0, v_in_D.norm());
    Mat jac(n, m);
    for (int a = 0; a < m; ++a) {
        Vec vp = v_in_D, vm = v_in_D;
        vp[a] += h;
        vm[a] -= h;
        jac.col(a) = (nh_exp(spec, q, vp, dt) - nh_exp(spec, q, vm, dt)) / (2.0 * h);
    }
    Vec qe = nh_exp(spec, q, v_in_D, dt);
    return frame_matrix(spec, qe).lu().solve(jac);
}

TransportState transport(const SystemSpec& spec, ConnectionKind kind, const Trajectory& traj,
                         const Vec& w0, const Vec* h0) {
    const int n = spec.n(), m = spec.m;
    if (h0 && kind != ConnectionKind::Barred)
        throw std::invalid_argument("covector transport is defined for the barred connection");
    if (traj.states.empty()) throw std::invalid_argument("transport: empty trajectory");

    auto table_at = [&](const Vec& q) {
        switch (kind) {
            case ConnectionKind::LeviCivita:
                return levi_civita(spec, q);
            case ConnectionKind::Nonholonomic:
                return nonholonomic_connection(spec, q);
            default:
                return barred_connection(spec, q);
        }
    };
    // joint RK4 of (q, v, W, h) so transport sees the continuous trajectory,
    // not an interpolation of the saved grid
    struct S {
        Vec q, v, W, h;
    };
    auto rhs = [&](const S& s) {
        auto tab = table_at(s.q);
        S d;
        d.q = frame_matrix(spec, s.q) * s.v;
        d.v = forces_for(spec, traj.kind, {s.q, s.v}, nullptr);
        d.W = Vec::Zero(n);
        for (int c = 0; c < n; ++c)
            for (int al = 0; al < n; ++al)
                for (int be = 0; be < n; ++be) d.W[c] -= tab(c, al, be) * s.v[al] * s.W[be];
        if (h0) {
            d.h = Vec::Zero(n);
            for (int be = 0; be < n; ++be)
                for (int al = 0; al < n; ++al)
                    for (int ga = 0; ga < n; ++ga)
                        d.h[be] += tab(ga, al, be) * s.v[al] * s.h[ga];
            Vec lam = multipliers(spec, s.q, s.v.head(m));
            d.h.tail(n - m) += lam;
        } else
            d.h = Vec::Zero(0);
        return d;
    };
    auto step = [&](S s, double dt) {
        auto add = [](const S& a, double c, const S& b) {
            S r;
            r.q = a.q + c * b.q;
            r.v = a.v + c * b.v;
            r.W = a.W + c * b.W;
            r.h = a.h.size() ? Vec(a.h + c * b.h) : Vec(Vec::Zero(0));
            return r;
        };
        S k1 = rhs(s);
        S k2 = rhs(add(s, 0.5 * dt, k1));
        S k3 = rhs(add(s, 0.5 * dt, k2));
        S k4 = rhs(add(s, dt, k3));
        s = add(s, dt / 6.0, k1);
        s = add(s, dt / 3.0, k2);
        s = add(s, dt / 3.0, k3);
        s = add(s, dt / 6.0, k4);
        return s;
    };

    TransportState out;
    S s{traj.states.front().q, traj.states.front().v, w0,
        h0 ? *h0 : Vec(Vec::Zero(0))};
    for (size_t i = 0; i < traj.states.size(); ++i) {
        out.t.push_back(traj.t[i]);
        out.W.push_back(s.W);
        if (h0) out.h.push_back(s.h);
        if (i + 1 < traj.states.size()) s = step(s, traj.dt);
    }
    return out;
}

double gauss_check_A(const SystemSpec& spec, const MetricField& ghat, const Vec& q,
                     const Vec& v_in_D, const Vec& u_in_D, double dt) {
    if (v_in_D.norm() == 0.0) return 0.0;  // exp is the identity at the tip
    Vec qe = nh_exp(spec, q, v_in_D, dt);
    Mat E = tangent_exp(spec, q, v_in_D, dt);
    Vec Tv = E * v_in_D, Tu = E * u_in_D;
    double lhs = Tv.dot(ghat.at(qe) * Tu);
    Vec v0 = Vec::Zero(spec.n()), u0 = Vec::Zero(spec.n());
    v0.head(spec.m) = v_in_D;
    u0.head(spec.m) = u_in_D;
    double rhs = v0.dot(ghat.at(q) * u0);
    return std::fabs(lhs - rhs);
}

double gauss_check_B(const SystemSpec& spec, const MetricField& ghat, const Vec& q,
                     const Vec& v_in_D, const Vec& w_in_Dg, double t_end, double dt) {
    const int n = spec.n(), m = spec.m;
    if (w_in_Dg.size() != n || w_in_Dg.head(m).norm() > 1e-12)
        throw std::invalid_argument("gauss_check_B: w must lie in the orthogonal complement");
    Vec v0 = Vec::Zero(n);
    v0.head(m) = v_in_D;
    Trajectory traj = integrate(spec, SprayKind::Nonholonomic, {q, v0}, t_end, dt);
    Vec h0 = Vec::Zero(n);
    TransportState ts = transport(spec, ConnectionKind::Barred, traj, w_in_Dg, &h0);
    double ref = v0.dot(ghat.at(q) * w_in_Dg);
    double drift = 0.0;
    for (size_t s = 0; s < traj.states.size(); ++s) {
        const auto& st = traj.states[s];
        double val = st.v.dot(ghat.at(st.q) * ts.W[s]) + ts.h[s].dot(ts.W[s]);
        drift = std::max(drift, std::fabs(val - ref));
    }
    return drift;
}

void write_trajectory_csv(const SystemSpec& spec, const Trajectory& traj,
                          const std::string& path) {
    std::ofstream f(path);
    f.precision(15);
    f << "t";
    for (const auto& c : spec.coords) f << ",q_" << c;
    for (int a = 0; a < spec.n(); ++a) f << ",v" << a;
    f << ",energy,vperp\n";
    for (size_t s = 0; s < traj.states.size(); ++s) {
        f << traj.t[s];
        for (int i = 0; i < spec.n(); ++i) f << "," << traj.states[s].q[i];
        for (int i = 0; i < spec.n(); ++i) f << "," << traj.states[s].v[i];
        f << "," << traj.energy[s] << "," << traj.vperp_norm[s] << "\n";
    }
}

void write_svg(const std::vector<Trajectory>& trajs, int ix, int iy, const std::string& path) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& tr : trajs)
        for (const auto& st : tr.states) {
            xmin = std::min(xmin, st.q[ix]);
            xmax = std::max(xmax, st.q[ix]);
            ymin = std::min(ymin, st.q[iy]);
            ymax = std::max(ymax, st.q[iy]);
        }
    double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    const double W = 600.0, pad = 20.0;
    auto sx = [&](double x) { return pad + (x - xmin) / span * (W - 2 * pad); };
    auto sy = [&](double y) { return W - pad - (y - ymin) / span * (W - 2 * pad); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    std::ofstream f(path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << W
      << "\" viewBox=\"0 0 " << W << " " << W << "\">\n";
    for (size_t k = 0; k < trajs.size(); ++k) {
        f << "<polyline fill=\"none\" stroke=\"" << colors[k % 5]
          << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& st : trajs[k].states) f << sx(st.q[ix]) << "," << sy(st.q[iy]) << " ";
        f << "\"/>\n";
    }
    f << "</svg>\n";
}

}  // namespace nhext
