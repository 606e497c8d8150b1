#include "nhext/geometry.hpp"

namespace nhext {

// ------------------------------------------------------- expression helpers

namespace {
bool is_lit(const Expr& e, double v) {
    const ExprNode* r = e.root();
    return r && r->op == ExprOp::Lit && r->value == v;
}
bool is_any_lit(const Expr& e, double& out) {
    const ExprNode* r = e.root();
    if (r && r->op == ExprOp::Lit) { out = r->value; return true; }
    return false;
}
}  // namespace

Expr ex_add(const Expr& a, const Expr& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (is_lit(a, 0)) return b;
    if (is_lit(b, 0)) return a;
    double x, y;
    if (is_any_lit(a, x) && is_any_lit(b, y)) return Expr::lit(x + y);
    return a + b;
}

Expr ex_sub(const Expr& a, const Expr& b) {
    if (b.empty() || is_lit(b, 0)) return a;
    if (a.empty() || is_lit(a, 0)) return -b;
    double x, y;
    if (is_any_lit(a, x) && is_any_lit(b, y)) return Expr::lit(x - y);
    return a - b;
}

Expr ex_mul(const Expr& a, const Expr& b) {
    if (a.empty() || b.empty() || is_lit(a, 0) || is_lit(b, 0)) return Expr::lit(0);
    if (is_lit(a, 1)) return b;
    if (is_lit(b, 1)) return a;
    double x, y;
    if (is_any_lit(a, x) && is_any_lit(b, y)) return Expr::lit(x * y);
    return a * b;
}

Expr ex_div(const Expr& a, const Expr& b) {
    if (a.empty() || is_lit(a, 0)) return Expr::lit(0);
    if (is_lit(b, 1)) return a;
    double x, y;
    if (is_any_lit(a, x) && is_any_lit(b, y) && y != 0) return Expr::lit(x / y);
    return a / b;
}

namespace {
std::vector<std::vector<Expr>> expr_minor(const std::vector<std::vector<Expr>>& a,
                                          size_t row, size_t col) {
    size_t n = a.size();
    std::vector<std::vector<Expr>> out;
    for (size_t i = 0; i < n; ++i) {
        if (i == row) continue;
        std::vector<Expr> r;
        for (size_t j = 0; j < n; ++j)
            if (j != col) r.push_back(a[i][j]);
        out.push_back(std::move(r));
    }
    return out;
}
}  // namespace

Expr expr_det(const std::vector<std::vector<Expr>>& a) {
    size_t n = a.size();
    if (n == 1) return a[0][0];
    Expr acc;
    for (size_t j = 0; j < n; ++j) {
        Expr term = ex_mul(a[0][j], expr_det(expr_minor(a, 0, j)));
        acc = (j % 2 == 0) ? ex_add(acc, term) : ex_sub(acc, term);
    }
    if (acc.empty()) acc = Expr::lit(0);
    return acc;
}

std::vector<std::vector<Expr>> expr_adjugate(const std::vector<std::vector<Expr>>& a) {
    size_t n = a.size();
    std::vector<std::vector<Expr>> adj(n, std::vector<Expr>(n));
    if (n == 1) {
        adj[0][0] = Expr::lit(1);
        return adj;
    }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            Expr cof = expr_det(expr_minor(a, i, j));
            if ((i + j) % 2 == 1) cof = ex_sub(Expr::lit(0), cof);
            adj[j][i] = cof;  // adjugate is the transposed cofactor matrix
        }
    return adj;
}

// ----------------------------------------------------------------- sampling

namespace {
double radical_inverse(unsigned base, unsigned long long i) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}
constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
}  // namespace

std::vector<Vec> sample_box(const SystemSpec& spec, int count, unsigned seed) {
    int n = spec.n();
    if (static_cast<size_t>(n) > std::size(kPrimes))
        throw ValidationError("chart dimension too large for the sampler");
    std::vector<Vec> pts;
    pts.reserve(count);
    for (int j = 0; j < count; ++j) {
        Vec q(n);
        for (int d = 0; d < n; ++d) {
            double u = radical_inverse(kPrimes[d], 1ull + seed + j);
            auto [lo, hi] = spec.box.range[d];
            q[d] = lo + u * (hi - lo);
        }
        pts.push_back(std::move(q));
    }
    return pts;
}

// ------------------------------------------------------------- frame/metric

Mat frame_matrix(const SystemSpec& spec, const Vec& q) {
    int n = spec.n();
    Mat A(n, n);
    auto ctx = spec.ctx(q.data());
    for (int beta = 0; beta < n; ++beta)
        for (int mu = 0; mu < n; ++mu)
            A(mu, beta) = spec.frame[beta][mu].eval(ctx);
    return A;
}

Mat frame_matrix_deriv(const SystemSpec& spec, const Vec& q, const Vec& dir) {
    int n = spec.n();
    Mat D(n, n);
    auto ctx = spec.ctx(q.data(), dir.data());
    for (int beta = 0; beta < n; ++beta)
        for (int mu = 0; mu < n; ++mu)
            D(mu, beta) = spec.frame[beta][mu].eval_dual(ctx).d;
    return D;
}

Tensor3 bracket_coeffs(const SystemSpec& spec, const Vec& q) {
    int n = spec.n();
    Mat A = frame_matrix(spec, q);
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw SingularFrame(q, std::numeric_limits<double>::infinity());

    // derivative of the whole frame matrix along each frame direction
    std::vector<Mat> D;
    D.reserve(n);
    for (int alpha = 0; alpha < n; ++alpha)
        D.push_back(frame_matrix_deriv(spec, q, Vec(A.col(alpha))));

    Tensor3 R(n);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            // [X_a, X_b]^mu = X_a(A^mu_b) - X_b(A^mu_a)
            Vec br = D[a].col(b) - D[b].col(a);
            Vec c = lu.solve(br);
            for (int g = 0; g < n; ++g) {
                R(g, a, b) = c[g];
                R(g, b, a) = -c[g];
            }
        }
    return R;
}

Mat frame_metric_at(const SystemSpec& spec, const Vec& q) {
    int n = spec.n();
    if (spec.frame_metric.empty())
        throw ValidationError("spec not validated: frame metric missing");
    Mat g(n, n);
    auto ctx = spec.ctx(q.data());
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b)
            g(a, b) = g(b, a) = spec.frame_metric[a][b].eval(ctx);
    return g;
}

std::vector<Mat> frame_metric_derivs(const SystemSpec& spec, const Vec& q) {
    int n = spec.n();
    Mat A = frame_matrix(spec, q);
    std::vector<Mat> out;
    out.reserve(n);
    for (int gamma = 0; gamma < n; ++gamma) {
        Vec dir = A.col(gamma);
        auto ctx = spec.ctx(q.data(), dir.data());
        Mat dg(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b)
                dg(a, b) = dg(b, a) = spec.frame_metric[a][b].eval_dual(ctx).d;
        out.push_back(std::move(dg));
    }
    return out;
}

FrameGeometry frame_geometry(const SystemSpec& spec, const Vec& q) {
    FrameGeometry fg;
    int n = spec.n(), m = spec.m, k = n - m;
    fg.A = frame_matrix(spec, q);
    Eigen::FullPivLU<Mat> lu(fg.A);
    if (!lu.isInvertible()) throw SingularFrame(q, std::numeric_limits<double>::infinity());
    fg.A_inv = lu.inverse();
    fg.R = bracket_coeffs(spec, q);
    fg.g = frame_metric_at(spec, q);
    fg.g_ab = fg.g.topLeftCorner(m, m);
    fg.g_ai = fg.g.topRightCorner(m, k);
    fg.g_ij = fg.g.bottomRightCorner(k, k);
    fg.K = -fg.g_ab.llt().solve(fg.g_ai);
    return fg;
}

// ------------------------------------------------------------- validation

void SystemSpec::validate(int samples, unsigned seed) {
    int nn = n();
    if (nn == 0) throw ValidationError("no coordinates");
    if (m < 1 || m >= nn) throw ValidationError("constraint rank must satisfy 1 <= m < n");
    if (static_cast<int>(frame.size()) != nn)
        throw ValidationError("frame must have n columns");
    for (auto& col : frame)
        if (static_cast<int>(col.size()) != nn)
            throw ValidationError("each frame column needs n components");
    if (static_cast<int>(metric.size()) != nn)
        throw ValidationError("metric must be n x n");
    for (auto& row : metric)
        if (static_cast<int>(row.size()) != nn)
            throw ValidationError("metric must be n x n");
    if (box.range.empty()) {
        box.range.assign(nn, {-1.0, 1.0});
    } else if (static_cast<int>(box.range.size()) != nn) {
        throw ValidationError("domain box must list every coordinate");
    }
    if (chaplygin) {
        if (static_cast<int>(chaplygin->generators.size()) != k())
            throw ValidationError("chaplygin markup needs k generators");
        for (auto& gen : chaplygin->generators)
            if (static_cast<int>(gen.size()) != nn)
                throw ValidationError("each generator needs n components");
    }

    // synthesize the frame-metric expressions g_{alpha beta} = A^T G A
    frame_metric.assign(nn, std::vector<Expr>(nn));
    if (metric_kind == MetricKind::Frame) {
        frame_metric = metric;
    } else {
        for (int al = 0; al < nn; ++al)
            for (int be = al; be < nn; ++be) {
                Expr acc;
                for (int mu = 0; mu < nn; ++mu)
                    for (int nu = 0; nu < nn; ++nu)
                        acc = ex_add(acc, ex_mul(frame[al][mu],
                                                 ex_mul(metric[mu][nu], frame[be][nu])));
                if (acc.empty()) acc = Expr::lit(0);
                frame_metric[al][be] = frame_metric[be][al] = acc;
            }
    }

    // pointwise invariants over the sample set
    for (const Vec& q : sample_box(*this, samples, seed)) {
        Mat A = frame_matrix(*this, q);
        Eigen::JacobiSVD<Mat> svd(A);
        double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
        if (!std::isfinite(cond) || cond > 1e10) throw SingularFrame(q, cond);

        auto ctx = this->ctx(q.data());
        Mat given(nn, nn);
        for (int i = 0; i < nn; ++i)
            for (int j = 0; j < nn; ++j) given(i, j) = metric[i][j].eval(ctx);
        double scale = std::max(1.0, given.cwiseAbs().maxCoeff());
        if ((given - given.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
            throw ValidationError("metric not symmetric");

        // the constrained block must be positive-definite; the full frame
        // metric only needs to be invertible (indefinite completions are legal)
        Mat g = frame_metric_at(*this, q);
        Eigen::SelfAdjointEigenSolver<Mat> es_ab(Mat(g.topLeftCorner(m, m)));
        if (es_ab.eigenvalues()(0) <= 1e-10)
            throw NotPositiveDefinite(q, es_ab.eigenvalues()(0));
        Eigen::SelfAdjointEigenSolver<Mat> es(g);
        double gmax = es.eigenvalues().cwiseAbs().maxCoeff();
        if (es.eigenvalues().cwiseAbs().minCoeff() <= 1e-10 * std::max(1.0, gmax))
            throw ValidationError("frame metric is singular on the sample box");
    }
}

// ---------------------------------------------------------- orthogonalize

SystemSpec orthogonalize(const SystemSpec& spec) {
    int n = spec.n(), m = spec.m, k = n - m;
    if (spec.frame_metric.empty())
        throw ValidationError("validate the spec before orthogonalizing");

    // already orthogonal? (checked numerically on the sample set)
    double worst = 0.0;
    for (const Vec& q : sample_box(spec)) {
        Mat g = frame_metric_at(spec, q);
        worst = std::max(worst, g.topRightCorner(m, k).cwiseAbs().maxCoeff());
    }
    if (worst < 1e-12) return spec;

    // X~_i = X_i - g^{ab} g_{bi} X_a, with g^{ab} = adj(g_ab)/det(g_ab)
    std::vector<std::vector<Expr>> gab(m, std::vector<Expr>(m));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) gab[a][b] = spec.frame_metric[a][b];
    Expr det = expr_det(gab);
    auto adj = expr_adjugate(gab);

    SystemSpec out = spec;
    for (int i = 0; i < k; ++i) {
        for (int mu = 0; mu < n; ++mu) {
            Expr corr;  // sum_ab adj[a][b] g_{b,i} X_a^mu
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    corr = ex_add(corr, ex_mul(adj[a][b],
                                               ex_mul(spec.frame_metric[b][m + i],
                                                      spec.frame[a][mu])));
            out.frame[m + i][mu] =
                ex_sub(spec.frame[m + i][mu], ex_div(corr, det));
        }
    }
    out.validate();
    return out;
}

// ----------------------------------------------------------- velocity maps

Vec quasi_to_coord(const SystemSpec& spec, const QuasiState& s) {
    return frame_matrix(spec, s.q) * s.v;
}

Vec coord_to_quasi(const SystemSpec& spec, const Vec& q, const Vec& qdot) {
    Mat A = frame_matrix(spec, q);
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw SingularFrame(q, std::numeric_limits<double>::infinity());
    return lu.solve(qdot);
}

}  // namespace nhext
