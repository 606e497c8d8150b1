#pragma once

// The solver: algebraic conditions on the off-block metric coefficients,
// their flow-derivative iterates, pointwise and ansatz least squares,
// positive-definite completion, the Chaplygin specialization, certification.

#include <optional>

#include "nhext/integrate.hpp"

namespace nhext {

struct NotChaplygin : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// parametric candidate for the off-block coefficients: per (a,i) slot a list
// of scalar basis functions of q, with one unknown coefficient each
struct ThetaAnsatz {
    std::vector<std::vector<std::vector<Expr>>> basis;  // [m][k][r]

    static ThetaAnsatz uniform(int m, int k, const std::vector<std::string>& fns);
    int num_coeffs() const;
    // ghat_ai entries for a concrete coefficient vector
    std::vector<std::vector<Expr>> materialize(const Vec& coeffs) const;
};

// one linear constraint M_k theta_k + r = 0 at a fixed state
struct LinearConstraint {
    Vec M;
    double r = 0.0;
    int level = 1;  // 1 = algebraic, 2 = its flow derivative, ...
    int a = 0;      // generating constrained index
};

struct ConditionReport {
    double max_residual = 0.0;
    double mean_residual = 0.0;
    int rank = 0;
    int nullity = 0;
    Vec solution;   // minimum-norm particular solution
    Mat nullspace;  // columns span the homogeneous solutions
    bool feasible = false;
    bool rank_deficient = false;
    double tol_feas = 0.0;
};

struct CSample {
    Vec q;
    Vec va;  // m constrained quasi-velocities
};
std::vector<CSample> sample_states(const SystemSpec& spec, int count, unsigned seed = 0);

// residual of theta_k R^k_{ab} v^b = 0 per constrained index a
Vec condition_A_residual(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat_ai,
                         const Vec& q, const Vec& va);
// residual of the flow condition per complement index i
Vec condition_B_residual(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat_ai,
                         const Vec& q, const Vec& va);

std::vector<LinearConstraint> iterated_conditions(const SystemSpec& spec, int depth, const Vec& q,
                                                  const Vec& va);

ConditionReport solve_pointwise(const SystemSpec& spec, const Vec& q,
                                const std::vector<Vec>& v_samples, int depth = 2);

std::pair<Vec, ConditionReport> fit_ansatz(const SystemSpec& spec, const ThetaAnsatz& ansatz,
                                           const std::vector<CSample>& samples, int depth = 2,
                                           bool include_B = true);

enum class CompletionPolicy { AlphaIdentity, BetaG };

struct CompletedMetric {
    std::vector<std::vector<Expr>> entries;  // full n x n frame metric
    CompletionPolicy policy = CompletionPolicy::AlphaIdentity;
    double value = 0.0;  // alpha or beta
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
};

CompletedMetric complete_metric(const SystemSpec& spec,
                                const std::vector<std::vector<Expr>>& ghat_ai,
                                CompletionPolicy policy = CompletionPolicy::AlphaIdentity,
                                std::optional<double> forced_value = std::nullopt,
                                double margin = 0.1, int samples = 64, unsigned seed = 0);

// largest eigenvalue of B^T A^{-1} B over the sample set (the completion bound)
double completion_bound(const SystemSpec& spec, const std::vector<std::vector<Expr>>& ghat_ai,
                        int samples = 64, unsigned seed = 0);

ExprMetricField metric_field(const SystemSpec& spec, const CompletedMetric& cm);

struct ChaplyginResult {
    SystemSpec adapted;  // complement columns replaced by the projected generators
    Vec mu_coeffs;
    ThetaAnsatz mu_ansatz;
    std::vector<std::vector<Expr>> ghat_ai;  // components in the adapted frame
    ConditionReport report;
    std::optional<CompletedMetric> metric;
    double integral_drift = 0.0;  // first-integral drift along a test trajectory
};
ChaplyginResult chaplygin_solve(const SystemSpec& spec, int samples = 64, unsigned seed = 0,
                                const ThetaAnsatz* mu_ansatz = nullptr);

// G_ai = g(X_a, (E_i)_Q) as expressions (coordinate-metric specs)
std::vector<std::vector<Expr>> chaplygin_pairing(const SystemSpec& spec);

// re-express off-block coefficients given in the adapted complement basis as
// coefficients against the spec's own complement columns (both bases span the
// same g-orthogonal complement)
std::vector<std::vector<Expr>> reframe_offblock(const SystemSpec& spec, const SystemSpec& adapted,
                                                const std::vector<std::vector<Expr>>& ghat_adapted);

struct CertifyOptions {
    double force_tol = 1e-8;
    double traj_tol = 1e-6;
    double gauss_a_tol = 1e-4;
    double gauss_b_tol = 1e-7;
    double t_end = 1.0;
    double dt = 1e-3;
    int samples = 50;
    unsigned seed = 0;
};
struct CertificationReport {
    double force_mismatch = 0.0;
    bool force_ok = false;
    double config_dev = 0.0, velocity_dev = 0.0;
    bool traj_ok = false;
    double gauss_a = 0.0, gauss_b = 0.0;
    bool gauss_ok = false;
    bool pass = false;
};
CertificationReport certify(const SystemSpec& spec, const CompletedMetric& cm,
                            const CertifyOptions& opt = {});

}  // namespace nhext
