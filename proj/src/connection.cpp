#include "nhext/connection.hpp"

namespace nhext {

Mat ExprMetricField::at(const Vec& q) const {
    const int n = static_cast<int>(entries_.size());
    Mat g(n, n);
    EvalContext ctx = spec_->ctx(q.data());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) g(a, b) = entries_[a][b].eval(ctx);
    return g;
}

std::vector<Mat> ExprMetricField::frame_derivs(const Vec& q, const Mat& A) const {
    const int n = static_cast<int>(entries_.size());
    std::vector<Mat> out(static_cast<size_t>(A.cols()), Mat::Zero(n, n));
    for (int c = 0; c < A.cols(); ++c) {
        Vec dir = A.col(c);
        EvalContext ctx = spec_->ctx(q.data(), dir.data());
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                out[c](a, b) = entries_[a][b].eval_dual(ctx).d;
    }
    return out;
}

ExprMetricField base_metric(const SystemSpec& spec) {
    if (spec.frame_metric.empty())
        throw ValidationError("spec has no synthesized frame metric; run validate() first");
    return ExprMetricField(spec, spec.frame_metric);
}

std::vector<Mat> CallableMetricField::frame_derivs(const Vec& q, const Mat& A) const {
    std::vector<Mat> out;
    out.reserve(static_cast<size_t>(A.cols()));
    for (int c = 0; c < A.cols(); ++c) {
        Vec dir = A.col(c);
        double scale = std::max(1.0, dir.norm());
        double h = h_ * scale;
        out.push_back((f_(q + (h / scale) * dir) - f_(q - (h / scale) * dir)) / (2.0 * h / scale));
    }
    return out;
}

ChristoffelTable levi_civita(const SystemSpec& spec, const MetricField& gf, const Vec& q) {
    const int n = spec.n();
    Mat A = frame_matrix(spec, q);
    Mat g = gf.at(q);
    std::vector<Mat> dg = gf.frame_derivs(q, A);
    Tensor3 R = bracket_coeffs(spec, q);

    Eigen::FullPivLU<Mat> lu(2.0 * g);
    if (!lu.isInvertible()) throw SingularMetric("frame metric singular in Koszul solve");

    ChristoffelTable table(ConnectionKind::LeviCivita, n);
    Vec rhs(n);
    for (int al = 0; al < n; ++al) {
        for (int be = 0; be < n; ++be) {
            for (int ga = 0; ga < n; ++ga) {
                double s = dg[al](be, ga) + dg[be](al, ga) - dg[ga](al, be);
                for (int mu = 0; mu < n; ++mu) {
                    s += g(mu, ga) * R(mu, al, be);
                    s += g(mu, be) * R(mu, ga, al);
                    s += g(mu, al) * R(mu, ga, be);
                }
                rhs[ga] = s;
            }
            Vec gam = lu.solve(rhs);
            for (int mu = 0; mu < n; ++mu) table(mu, al, be) = gam[mu];
        }
    }
    return table;
}

ChristoffelTable levi_civita(const SystemSpec& spec, const Vec& q) {
    return levi_civita(spec, base_metric(spec), q);
}

ChristoffelTable nonholonomic_from(const ChristoffelTable& lc, int m) {
    const int n = lc.n;
    ChristoffelTable t(ConnectionKind::Nonholonomic, n);
    for (int c = 0; c < n; ++c)
        for (int al = 0; al < n; ++al)
            for (int be = 0; be < n; ++be) {
                bool c_in_D = c < m, be_in_D = be < m;
                double v = lc(c, al, be);
                if (be_in_D)
                    t(c, al, be) = c_in_D ? v : 0.0;  // second slot in D: project
                else
                    t(c, al, be) = c_in_D ? 2.0 * v : v;  // P(...) + the full term
            }
    return t;
}

ChristoffelTable barred_from(const ChristoffelTable& lc, const Tensor3& R, int m) {
    const int n = lc.n;
    ChristoffelTable t(ConnectionKind::Barred, n);
    for (int c = 0; c < n; ++c)
        for (int al = 0; al < n; ++al)
            for (int be = 0; be < n; ++be) {
                bool c_in_D = c < m, al_in_D = al < m, be_in_D = be < m;
                double v = 0.0;
                if (al_in_D && be_in_D)
                    v = c_in_D ? lc(c, al, be) : 0.0;
                else if (al_in_D && !be_in_D)
                    v = c_in_D ? 0.0 : R(c, al, be);
                else if (!al_in_D && be_in_D)
                    v = c_in_D ? R(c, al, be) : 0.0;
                else
                    v = c_in_D ? 0.0 : lc(c, al, be);
                t(c, al, be) = v;
            }
    return t;
}

ChristoffelTable nonholonomic_connection(const SystemSpec& spec, const Vec& q) {
    return nonholonomic_from(levi_civita(spec, q), spec.m);
}

ChristoffelTable barred_connection(const SystemSpec& spec, const Vec& q) {
    return barred_from(levi_civita(spec, q), bracket_coeffs(spec, q), spec.m);
}

}  // namespace nhext
