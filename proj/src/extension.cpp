#include "nhext/extension.hpp"

#include <cstdint>

namespace nhext {

namespace {

// deterministic cross-platform generator for velocity samples
struct SplitMix {
    uint64_t s;
    explicit SplitMix(uint64_t seed) : s(seed) {}
    double next() {  // uniform in [-1, 1)
        s += 0x9e3779b97f4a7c15ULL;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
    }
};

// whether the spec's complement columns already equal the g-orthogonal
// projections of the symmetry generators
bool complement_is_adapted(const SystemSpec& spec) {
    if (!spec.chaplygin || spec.metric_kind != MetricKind::Coordinate) return false;
    const int n = spec.n(), m = spec.m, k = spec.k();
    for (const Vec& q : sample_box(spec, 5, 1)) {
        Mat A = frame_matrix(spec, q);
        Mat g = frame_metric_at(spec, q);
        Mat Gfull(n, k);
        EvalContext ctx = spec.ctx(q.data());
        for (int i = 0; i < k; ++i)
            for (int mu = 0; mu < n; ++mu)
                Gfull(mu, i) = spec.chaplygin->generators[i][mu].eval(ctx);
        // pairings g(X_a, E_i) via the coordinate metric pulled to the frame
        Mat gcoord(n, n);
        for (int mu = 0; mu < n; ++mu)
            for (int nu = 0; nu < n; ++nu) gcoord(mu, nu) = spec.metric[mu][nu].eval(ctx);
        Mat Gai = A.leftCols(m).transpose() * gcoord * Gfull;
        Mat proj = Gfull - A.leftCols(m) * g.topLeftCorner(m, m).llt().solve(Gai);
        if ((proj - A.rightCols(k)).cwiseAbs().maxCoeff() > 1e-9) return false;
    }
    return true;
}

double eval_at(const SystemSpec& spec, const Expr& e, const Vec& q) {
    EvalContext ctx = spec.ctx(q.data());
    return e.eval(ctx);
}

Mat eval_ghat(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat, const Vec& q) {
    const int m = spec.m, k = spec.k();
    Mat B(m, k);
    EvalContext ctx = spec.ctx(q.data());
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < k; ++i) B(a, i) = ghat[a][i].eval(ctx);
    return B;
}

// theta_k at a state: ghat_{ak} v^a
Vec theta_at(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat, const Vec& q,
             const Vec& va) {
    return eval_ghat(spec, ghat, q).transpose() * va;
}

// S^k_a = R^k_{ab} v^b for all complement k, constrained a
Mat S_matrix(const SystemSpec& spec, const Tensor3& R, const Vec& va) {
    const int m = spec.m, k = spec.k();
    Mat S(k, m);
    for (int k0 = 0; k0 < k; ++k0)
        for (int a = 0; a < m; ++a) {
            double s = 0.0;
            for (int b = 0; b < m; ++b) s += R(m + k0, a, b) * va[b];
            S(k0, a) = s;
        }
    return S;
}

// T^k_j = R^k_{ja} v^a (first slot complement)
Mat T_matrix(const SystemSpec& spec, const Tensor3& R, const Vec& va) {
    const int m = spec.m, k = spec.k();
    Mat T(k, k);
    for (int k0 = 0; k0 < k; ++k0)
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            for (int a = 0; a < m; ++a) s += R(m + k0, m + j, a) * va[a];
            T(k0, j) = s;
        }
    return T;
}

std::pair<Vec, double> level_Mr(const SystemSpec& spec, int lvl, int a, const Vec& q,
                                const Vec& va) {
    const int k = spec.k();
    if (lvl <= 1) {
        Tensor3 R = bracket_coeffs(spec, q);
        return {S_matrix(spec, R, va).col(a), 0.0};
    }
    auto [Mp, rp] = level_Mr(spec, lvl - 1, a, q, va);
    const double h = 1e-5;
    auto [qp, vp] = nh_flow_step(spec, q, va, h);
    auto [qm, vm] = nh_flow_step(spec, q, va, -h);
    auto [Mpp, rpp] = level_Mr(spec, lvl - 1, a, qp, vp);
    auto [Mpm, rpm] = level_Mr(spec, lvl - 1, a, qm, vm);
    Vec dM = (Mpp - Mpm) / (2.0 * h);
    double dr = (rpp - rpm) / (2.0 * h);
    Tensor3 R = bracket_coeffs(spec, q);
    Mat T = T_matrix(spec, R, va);
    Vec lam = multipliers(spec, q, va);
    Vec Mn(k);
    for (int k0 = 0; k0 < k; ++k0) Mn[k0] = dM[k0] - T.row(k0).dot(Mp);
    return {Mn, dr - Mp.dot(lam)};
}

// overall size of the metric, for nondimensionalized tolerances
double metric_scale(const SystemSpec& spec) {
    double s = 1.0;
    for (const Vec& q : sample_box(spec, 16))
        s = std::max(s, frame_metric_at(spec, q).cwiseAbs().maxCoeff());
    return s;
}

// minimize |A x + b|; fills rank/nullity/solution/nullspace/residual fields
void ls_solve(const Mat& A, const Vec& b, ConditionReport& rep, double scale) {
    const int nc = static_cast<int>(A.cols());
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    double smax = sv.size() ? sv[0] : 0.0;
    double rank_tol = 1e-10 * std::max(smax, 1e-300);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > rank_tol) ++rank;
    Vec x = Vec::Zero(nc);
    for (int i = 0; i < rank; ++i)
        x -= svd.matrixV().col(i) * (svd.matrixU().col(i).dot(b) / sv[i]);
    rep.rank = rank;
    rep.nullity = nc - rank;
    rep.rank_deficient = rank < nc;
    rep.solution = x;
    rep.nullspace = svd.matrixV().rightCols(nc - rank);
    Vec resid = A * x + b;
    rep.max_residual = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
    rep.mean_residual = resid.size() ? resid.cwiseAbs().mean() : 0.0;
    rep.tol_feas = 1e-8 * scale;
    rep.feasible = rep.max_residual <= rep.tol_feas;
}

}  // namespace

ThetaAnsatz ThetaAnsatz::uniform(int m, int k, const std::vector<std::string>& fns) {
    ThetaAnsatz a;
    a.basis.assign(m, std::vector<std::vector<Expr>>(k));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            for (const auto& f : fns) a.basis[i][j].push_back(Expr::parse(f));
    return a;
}

int ThetaAnsatz::num_coeffs() const {
    int n = 0;
    for (const auto& row : basis)
        for (const auto& slot : row) n += static_cast<int>(slot.size());
    return n;
}

std::vector<std::vector<Expr>> ThetaAnsatz::materialize(const Vec& coeffs) const {
    std::vector<std::vector<Expr>> out(basis.size());
    int idx = 0;
    for (size_t a = 0; a < basis.size(); ++a) {
        out[a].resize(basis[a].size());
        for (size_t i = 0; i < basis[a].size(); ++i) {
            Expr acc = Expr::lit(0.0);
            for (const Expr& b : basis[a][i]) acc = ex_add(acc, ex_mul(Expr::lit(coeffs[idx++]), b));
            out[a][i] = acc;
        }
    }
    return out;
}

std::vector<CSample> sample_states(const SystemSpec& spec, int count, unsigned seed) {
    auto qs = sample_box(spec, count, seed);
    SplitMix rng(0x243f6a8885a308d3ULL ^ seed);
    std::vector<CSample> out;
    out.reserve(qs.size());
    for (const Vec& q : qs) {
        Vec va(spec.m);
        for (int a = 0; a < spec.m; ++a) va[a] = rng.next();
        if (va.norm() < 0.3) va = Vec::Constant(spec.m, 0.7);
        out.push_back({q, va});
    }
    return out;
}

Vec condition_A_residual(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat,
                         const Vec& q, const Vec& va) {
    Tensor3 R = bracket_coeffs(spec, q);
    Mat S = S_matrix(spec, R, va);
    Vec theta = theta_at(spec, ghat, q, va);
    return S.transpose() * theta;
}

Vec condition_B_residual(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat,
                         const Vec& q, const Vec& va) {
    const int k = spec.k();
    Tensor3 R = bracket_coeffs(spec, q);
    Mat T = T_matrix(spec, R, va);
    Vec theta = theta_at(spec, ghat, q, va);
    Vec lam = multipliers(spec, q, va);
    Vec res(k);
    for (int i = 0; i < k; ++i) {
        double gamma = flow_derivative(
            spec,
            [&](const Vec& qq, const Vec& vv) { return theta_at(spec, ghat, qq, vv)[i]; }, q, va);
        res[i] = gamma + T.col(i).dot(theta) + lam[i];
    }
    return res;
}

std::vector<LinearConstraint> iterated_conditions(const SystemSpec& spec, int depth, const Vec& q,
                                                  const Vec& va) {
    std::vector<LinearConstraint> out;
    for (int lvl = 1; lvl <= depth; ++lvl)
        for (int a = 0; a < spec.m; ++a) {
            auto [M, r] = level_Mr(spec, lvl, a, q, va);
            out.push_back({M, r, lvl, a});
        }
    return out;
}

ConditionReport solve_pointwise(const SystemSpec& spec, const Vec& q,
                                const std::vector<Vec>& v_samples, int depth) {
    const int m = spec.m, k = spec.k();
    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (const Vec& va : v_samples) {
        for (const auto& con : iterated_conditions(spec, depth, q, va)) {
            Vec row = Vec::Zero(m * k);
            for (int a = 0; a < m; ++a)
                for (int k0 = 0; k0 < k; ++k0) row[a * k + k0] = con.M[k0] * va[a];
            rows.push_back(row);
            rhs.push_back(con.r);
        }
    }
    Mat A(rows.size(), m * k);
    Vec b(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        A.row(r) = rows[r];
        b[r] = rhs[r];
    }
    ConditionReport rep;
    ls_solve(A, b, rep, metric_scale(spec));
    return rep;
}

std::pair<Vec, ConditionReport> fit_ansatz(const SystemSpec& spec, const ThetaAnsatz& ansatz,
                                           const std::vector<CSample>& samples, int depth,
                                           bool include_B) {
    const int m = spec.m, k = spec.k();
    const int nc = ansatz.num_coeffs();
    // column offsets per slot
    std::vector<std::vector<int>> off(m, std::vector<int>(k, 0));
    {
        int idx = 0;
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < k; ++i) {
                off[a][i] = idx;
                idx += static_cast<int>(ansatz.basis[a][i].size());
            }
    }
    std::vector<Vec> rows;
    std::vector<double> rhs;
    const double h = 1e-5;
    for (const auto& [q, va] : samples) {
        // basis values at the sample point
        std::vector<std::vector<std::vector<double>>> bval(m);
        for (int a = 0; a < m; ++a) {
            bval[a].resize(k);
            for (int i = 0; i < k; ++i)
                for (const Expr& e : ansatz.basis[a][i])
                    bval[a][i].push_back(eval_at(spec, e, q));
        }
        for (const auto& con : iterated_conditions(spec, depth, q, va)) {
            Vec row = Vec::Zero(nc);
            for (int a = 0; a < m; ++a)
                for (int i = 0; i < k; ++i)
                    for (size_t r = 0; r < bval[a][i].size(); ++r)
                        row[off[a][i] + static_cast<int>(r)] = con.M[i] * va[a] * bval[a][i][r];
            rows.push_back(row);
            rhs.push_back(con.r);
        }
        if (!include_B) continue;
        auto [qp, vp] = nh_flow_step(spec, q, va, h);
        auto [qm, vm] = nh_flow_step(spec, q, va, -h);
        Tensor3 R = bracket_coeffs(spec, q);
        Mat T = T_matrix(spec, R, va);
        Vec lam = multipliers(spec, q, va);
        // flow derivative of b_r(q) v^a per slot basis function
        std::vector<std::vector<std::vector<double>>> bdot(m);
        for (int a = 0; a < m; ++a) {
            bdot[a].resize(k);
            for (int i = 0; i < k; ++i)
                for (const Expr& e : ansatz.basis[a][i])
                    bdot[a][i].push_back(
                        (eval_at(spec, e, qp) * vp[a] - eval_at(spec, e, qm) * vm[a]) / (2.0 * h));
        }
        for (int i = 0; i < k; ++i) {
            Vec row = Vec::Zero(nc);
            for (int a = 0; a < m; ++a)
                for (int j = 0; j < k; ++j)
                    for (size_t r = 0; r < bval[a][j].size(); ++r) {
                        double c = bval[a][j][r] * va[a] * T(j, i);
                        if (j == i) c += bdot[a][j][r];
                        row[off[a][j] + static_cast<int>(r)] += c;
                    }
            rows.push_back(row);
            rhs.push_back(lam[i]);
        }
    }
    Mat A(rows.size(), nc);
    Vec b(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        A.row(r) = rows[r];
        b[r] = rhs[r];
    }
    ConditionReport rep;
    ls_solve(A, b, rep, metric_scale(spec));
    return {rep.solution, rep};
}

double completion_bound(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat,
                        int samples, unsigned seed) {
    const int m = spec.m;
    double bound = 0.0;
    for (const Vec& q : sample_box(spec, samples, seed)) {
        Mat g = frame_metric_at(spec, q);
        Mat B = eval_ghat(spec, ghat, q);
        Mat A_blk = g.topLeftCorner(m, m);
        Mat schur = B.transpose() * A_blk.llt().solve(B);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (schur + schur.transpose()));
        bound = std::max(bound, es.eigenvalues().maxCoeff());
    }
    return bound;
}

CompletedMetric complete_metric(const SystemSpec& spec,
                                const std::vector<std::vector<Expr>>& ghat,
                                CompletionPolicy policy, std::optional<double> forced_value,
                                double margin, int samples, unsigned seed) {
    const int n = spec.n(), m = spec.m, k = spec.k();
    CompletedMetric cm;
    cm.policy = policy;
    if (policy == CompletionPolicy::AlphaIdentity)
        cm.value = forced_value ? *forced_value
                                : (1.0 + margin) * std::max(completion_bound(spec, ghat, samples, seed),
                                                            1e-6 / (1.0 + margin));
    else
        cm.value = forced_value.value_or(1.0);

    cm.entries.assign(n, std::vector<Expr>(n));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) cm.entries[a][b] = spec.frame_metric[a][b];
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < k; ++i) {
            cm.entries[a][m + i] = ghat[a][i];
            cm.entries[m + i][a] = ghat[a][i];
        }
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (policy == CompletionPolicy::AlphaIdentity)
                cm.entries[m + i][m + j] = (i == j) ? Expr::lit(cm.value) : Expr::lit(0.0);
            else
                cm.entries[m + i][m + j] =
                    ex_mul(Expr::lit(cm.value), spec.frame_metric[m + i][m + j]);
        }

    double min_eig = 1e300;
    Vec witness;
    ExprMetricField field(spec, cm.entries);
    for (const Vec& q : sample_box(spec, samples, seed)) {
        Mat g = field.at(q);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()));
        double me = es.eigenvalues().minCoeff();
        if (me < min_eig) {
            min_eig = me;
            witness = q;
        }
    }
    cm.min_eigenvalue = min_eig;
    cm.positive_definite = min_eig > 0.0;
    if (!cm.positive_definite && policy == CompletionPolicy::AlphaIdentity && forced_value)
        throw NotPositiveDefinite(witness, min_eig);
    return cm;
}

ExprMetricField metric_field(const SystemSpec& spec, const CompletedMetric& cm) {
    return ExprMetricField(spec, cm.entries);
}

std::vector<std::vector<Expr>> chaplygin_pairing(const SystemSpec& spec) {
    if (!spec.chaplygin)
        throw NotChaplygin("system has no symmetry markup");
    if (spec.metric_kind != MetricKind::Coordinate)
        throw NotChaplygin("symmetry pairing needs a coordinate metric");
    const int n = spec.n(), m = spec.m, k = spec.k();
    std::vector<std::vector<Expr>> G(m, std::vector<Expr>(k));
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < k; ++i) {
            Expr acc = Expr::lit(0.0);
            for (int mu = 0; mu < n; ++mu)
                for (int nu = 0; nu < n; ++nu)
                    acc = ex_add(acc, ex_mul(ex_mul(spec.frame[a][mu], spec.metric[mu][nu]),
                                             spec.chaplygin->generators[i][nu]));
            G[a][i] = acc;
        }
    return G;
}

std::vector<std::vector<Expr>> reframe_offblock(const SystemSpec& spec, const SystemSpec& adapted,
                                                const std::vector<std::vector<Expr>>& ghat_adapted) {
    if (spec.metric_kind != MetricKind::Coordinate)
        throw ValidationError("complement reframing needs a coordinate metric");
    const int n = spec.n(), m = spec.m, k = spec.k();
    {
        // identical complements -> identity change of basis
        bool same = true;
        for (const Vec& q : sample_box(spec, 5, 1)) {
            Mat A = frame_matrix(spec, q), B = frame_matrix(adapted, q);
            if ((A.rightCols(k) - B.rightCols(k)).cwiseAbs().maxCoeff() > 1e-9) same = false;
        }
        if (same) return ghat_adapted;
    }
    auto pair_cols = [&](const std::vector<Expr>& u, const std::vector<Expr>& w) {
        Expr acc = Expr::lit(0.0);
        for (int mu = 0; mu < n; ++mu)
            for (int nu = 0; nu < n; ++nu)
                acc = ex_add(acc, ex_mul(ex_mul(u[mu], spec.metric[mu][nu]), w[nu]));
        return acc;
    };
    // X_i = P^j_i Xt_j with g(Xt_l, Xt_j) P^j_i = g(Xt_l, X_i)
    std::vector<std::vector<Expr>> gt(k, std::vector<Expr>(k)), M(k, std::vector<Expr>(k));
    for (int l = 0; l < k; ++l)
        for (int j = 0; j < k; ++j) {
            gt[l][j] = pair_cols(adapted.frame[m + l], adapted.frame[m + j]);
            M[l][j] = pair_cols(adapted.frame[m + l], spec.frame[m + j]);
        }
    Expr det = expr_det(gt);
    auto adj = expr_adjugate(gt);
    std::vector<std::vector<Expr>> out(m, std::vector<Expr>(k));
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < k; ++i) {
            Expr acc = Expr::lit(0.0);
            for (int j = 0; j < k; ++j) {
                Expr pj = Expr::lit(0.0);
                for (int l = 0; l < k; ++l) pj = ex_add(pj, ex_mul(adj[j][l], M[l][i]));
                acc = ex_add(acc, ex_mul(ghat_adapted[a][j], ex_div(pj, det)));
            }
            out[a][i] = acc;
        }
    return out;
}

ChaplyginResult chaplygin_solve(const SystemSpec& spec, int samples, unsigned seed,
                                const ThetaAnsatz* mu_ansatz) {
    const int n = spec.n(), m = spec.m, k = spec.k();
    if (!spec.chaplygin) throw NotChaplygin("system has no symmetry markup");

    // invariance check: [X_a, (E_i)_Q] = 0
    for (const Vec& q : sample_box(spec, 16, seed)) {
        Mat A = frame_matrix(spec, q);
        for (int i = 0; i < k; ++i) {
            Vec gen(n);
            {
                EvalContext ctx = spec.ctx(q.data());
                for (int mu = 0; mu < n; ++mu)
                    gen[mu] = spec.chaplygin->generators[i][mu].eval(ctx);
            }
            for (int a = 0; a < m; ++a) {
                Vec dir_a = A.col(a);
                for (int mu = 0; mu < n; ++mu) {
                    EvalContext ca = spec.ctx(q.data(), dir_a.data());
                    double xa_e = spec.chaplygin->generators[i][mu].eval_dual(ca).d;
                    EvalContext cg = spec.ctx(q.data(), gen.data());
                    double e_xa = spec.frame[a][mu].eval_dual(cg).d;
                    if (std::fabs(xa_e - e_xa) > 1e-9)
                        throw NotChaplygin("frame does not commute with the generators");
                }
            }
        }
    }

    ChaplyginResult res;
    res.mu_ansatz = mu_ansatz ? *mu_ansatz : ThetaAnsatz::uniform(m, k, {"1"});
    const ThetaAnsatz& ans = res.mu_ansatz;
    const int nc = ans.num_coeffs();
    auto G = chaplygin_pairing(spec);

    // adapted frame: complement columns become the g-orthogonal projections of
    // the generators, Xt_i = (E_i)_Q - g^{ab} G_{bi} X_a (kept as-is when the
    // spec's complement already is that projection)
    SystemSpec ch = spec;
    if (!complement_is_adapted(spec)) {
        std::vector<std::vector<Expr>> gab(m, std::vector<Expr>(m));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) gab[a][b] = spec.frame_metric[a][b];
        Expr det = expr_det(gab);
        auto adj = expr_adjugate(gab);
        for (int i = 0; i < k; ++i)
            for (int mu = 0; mu < n; ++mu) {
                Expr col = spec.chaplygin->generators[i][mu];
                for (int a = 0; a < m; ++a) {
                    Expr num = Expr::lit(0.0);
                    for (int b = 0; b < m; ++b) num = ex_add(num, ex_mul(adj[a][b], G[b][i]));
                    col = ex_sub(col, ex_mul(ex_div(num, det), spec.frame[a][mu]));
                }
                ch.frame[m + i][mu] = col;
            }
        ch.validate();
    }
    res.adapted = ch;

    std::vector<std::vector<int>> off(m, std::vector<int>(k, 0));
    {
        int idx = 0;
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < k; ++i) {
                off[a][i] = idx;
                idx += static_cast<int>(ans.basis[a][i].size());
            }
    }

    auto states = sample_states(ch, samples, seed);
    std::vector<Vec> rows;
    std::vector<double> rhs;
    const double h = 1e-5;
    for (const auto& [q, va] : states) {
        Tensor3 R = bracket_coeffs(ch, q);
        Mat S = S_matrix(ch, R, va);
        Mat Gv = eval_ghat(ch, G, q);  // G_{ai}(q)
        auto [qp, vp] = nh_flow_step(ch, q, va, h);
        auto [qm, vm] = nh_flow_step(ch, q, va, -h);
        Tensor3 Rp = bracket_coeffs(ch, qp), Rm = bracket_coeffs(ch, qm);
        Mat Sp = S_matrix(ch, Rp, vp), Sm = S_matrix(ch, Rm, vm);
        Mat Gp = eval_ghat(ch, G, qp), Gm = eval_ghat(ch, G, qm);

        // algebraic condition per constrained index c, plus its flow derivative
        for (int c = 0; c < m; ++c) {
            Vec row = Vec::Zero(nc), drow = Vec::Zero(nc);
            for (int a = 0; a < m; ++a)
                for (int i = 0; i < k; ++i)
                    for (size_t r = 0; r < ans.basis[a][i].size(); ++r) {
                        EvalContext cq = spec.ctx(q.data());
                        double b0 = ans.basis[a][i][r].eval(cq);
                        row[off[a][i] + static_cast<int>(r)] += b0 * va[a] * S(i, c);
                        EvalContext cp = spec.ctx(qp.data()), cm2 = spec.ctx(qm.data());
                        double bp = ans.basis[a][i][r].eval(cp);
                        double bm = ans.basis[a][i][r].eval(cm2);
                        drow[off[a][i] + static_cast<int>(r)] +=
                            (bp * vp[a] * Sp(i, c) - bm * vm[a] * Sm(i, c)) / (2.0 * h);
                    }
            double g_term = 0.0, dg_term = 0.0;
            for (int b = 0; b < m; ++b)
                for (int i = 0; i < k; ++i) {
                    g_term += Gv(b, i) * va[b] * S(i, c);
                    dg_term += (Gp(b, i) * vp[b] * Sp(i, c) - Gm(b, i) * vm[b] * Sm(i, c)) /
                               (2.0 * h);
                }
            rows.push_back(row);
            rhs.push_back(-g_term);
            rows.push_back(drow);
            rhs.push_back(-dg_term);
        }
        // first-integral rows: flow derivative of mu_i vanishes
        for (int i = 0; i < k; ++i) {
            Vec row = Vec::Zero(nc);
            for (int a = 0; a < m; ++a)
                for (size_t r = 0; r < ans.basis[a][i].size(); ++r) {
                    EvalContext cp = spec.ctx(qp.data()), cm2 = spec.ctx(qm.data());
                    row[off[a][i] + static_cast<int>(r)] +=
                        (ans.basis[a][i][r].eval(cp) * vp[a] -
                         ans.basis[a][i][r].eval(cm2) * vm[a]) /
                        (2.0 * h);
                }
            rows.push_back(row);
            rhs.push_back(0.0);
        }
    }
    Mat A(rows.size(), nc);
    Vec b(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        A.row(r) = rows[r];
        b[r] = rhs[r];
    }
    ls_solve(A, b, res.report, metric_scale(ch));
    res.mu_coeffs = res.report.solution;

    auto mu_exprs = ans.materialize(res.mu_coeffs);
    res.ghat_ai.assign(m, std::vector<Expr>(k));
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < k; ++i) res.ghat_ai[a][i] = ex_sub(mu_exprs[a][i], G[a][i]);

    if (res.report.feasible) {
        // drift of the first integrals along an actual trajectory
        const auto& s0 = states.front();
        Vec v0 = Vec::Zero(n);
        v0.head(m) = s0.va;
        auto traj = integrate(ch, SprayKind::Nonholonomic, {s0.q, v0}, 1.0, 1e-3);
        Vec mu0;
        for (size_t sidx = 0; sidx < traj.states.size(); ++sidx) {
            const auto& st = traj.states[sidx];
            Vec mu = eval_ghat(ch, mu_exprs, st.q).transpose() * st.v.head(m);
            if (sidx == 0)
                mu0 = mu;
            else
                res.integral_drift = std::max(res.integral_drift, (mu - mu0).cwiseAbs().maxCoeff());
        }
        res.metric = complete_metric(ch, res.ghat_ai);
    }
    return res;
}

CertificationReport certify(const SystemSpec& spec, const CompletedMetric& cm,
                            const CertifyOptions& opt) {
    const int n = spec.n(), m = spec.m;
    CertificationReport rep;
    ExprMetricField field = metric_field(spec, cm);
    double scale = metric_scale(spec);

    auto states = sample_states(spec, opt.samples, opt.seed);
    for (const auto& [q, va] : states) {
        Vec v = Vec::Zero(n);
        v.head(m) = va;
        Vec F = extension_geodesic_forces(spec, field, {q, v}).F;
        Vec f = nonholonomic_forces(spec, q, va).F;
        rep.force_mismatch = std::max(rep.force_mismatch, (F - f).cwiseAbs().maxCoeff());
    }
    rep.force_ok = rep.force_mismatch < opt.force_tol * scale;

    const auto& s0 = states.front();
    auto comparison = compare(spec, field, s0.q, s0.va, opt.t_end, opt.dt);
    rep.config_dev = comparison.max_config_dev;
    rep.velocity_dev = comparison.max_velocity_dev;
    rep.traj_ok = rep.config_dev < opt.traj_tol;

    Vec v_small = 0.1 * s0.va / std::max(s0.va.norm(), 1e-12);
    Vec u = Vec::Zero(m);
    u[0] = 1.0;
    rep.gauss_a = gauss_check_A(spec, field, s0.q, v_small, u);
    Vec w = Vec::Zero(n);
    w[m] = 1.0;
    rep.gauss_b = gauss_check_B(spec, field, s0.q, s0.va, w, opt.t_end, opt.dt);
    rep.gauss_ok = rep.gauss_a < opt.gauss_a_tol && rep.gauss_b < opt.gauss_b_tol;

    rep.pass = rep.force_ok && rep.traj_ok && rep.gauss_ok;
    return rep;
}

}  // namespace nhext
