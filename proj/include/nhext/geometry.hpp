#pragma once

// Configuration chart, anholonomic frame adapted to the constraints, frame
// metric, bracket coefficients, orthogonal adaptation.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "nhext/expr.hpp"

namespace nhext {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularFrame : GeometryError {
    Vec q;
    double condition_number;
    SingularFrame(Vec point, double cond)
        : GeometryError("frame matrix singular/ill-conditioned (cond = " +
                        std::to_string(cond) + ")"),
          q(std::move(point)), condition_number(cond) {}
};
struct NotPositiveDefinite : GeometryError {
    Vec q;
    double min_eigenvalue;
    NotPositiveDefinite(Vec point, double mineig)
        : GeometryError("metric not positive-definite (min eigenvalue = " +
                        std::to_string(mineig) + ")"),
          q(std::move(point)), min_eigenvalue(mineig) {}
};
struct SingularBlock : GeometryError {
    using GeometryError::GeometryError;
};
struct ValidationError : GeometryError {
    using GeometryError::GeometryError;
};

// simple antisymmetric-in-(a,b) 3-tensor holder, entry order (c, a, b)
struct Tensor3 {
    int n = 0;
    std::vector<double> data;
    explicit Tensor3(int dim = 0) : n(dim), data(static_cast<size_t>(dim) * dim * dim, 0.0) {}
    double& operator()(int c, int a, int b) { return data[(static_cast<size_t>(c) * n + a) * n + b]; }
    double operator()(int c, int a, int b) const { return data[(static_cast<size_t>(c) * n + a) * n + b]; }
};

struct DomainBox {
    // per-coordinate [lo, hi]; aligned with SystemSpec::coords
    std::vector<std::array<double, 2>> range;
};

struct ChaplyginMarkup {
    // k vertical generators, each a coordinate-component expression vector (length n)
    std::vector<std::vector<Expr>> generators;
};

enum class MetricKind { Coordinate, Frame };

struct QuasiState {
    Vec q;  // configuration point
    Vec v;  // quasi-velocities in the working frame
};

struct SystemSpec {
    std::string name;
    std::vector<std::string> coords;
    std::map<std::string, double> params;
    int m = 0;  // constraint rank; columns 0..m-1 of the frame span D

    // frame[beta][mu]: X_beta = frame[beta][mu] d/dq^mu
    std::vector<std::vector<Expr>> frame;

    MetricKind metric_kind = MetricKind::Coordinate;
    std::vector<std::vector<Expr>> metric;  // n x n symmetric entries as given

    std::optional<ChaplyginMarkup> chaplygin;
    DomainBox box;

    // synthesized by validate(): frame-metric entries g_{alpha beta}(q)
    std::vector<std::vector<Expr>> frame_metric;

    int n() const { return static_cast<int>(coords.size()); }
    int k() const { return n() - m; }

    EvalContext ctx(const double* q, const double* dir = nullptr) const {
        EvalContext c;
        c.coord_names = &coords;
        c.coords = q;
        c.direction = dir;
        c.params = &params;
        return c;
    }

    // builds frame_metric and enforces the structural invariants on the sample set
    void validate(int samples = 64, unsigned seed = 0);
};

// deterministic low-discrepancy sample points over the spec's box
std::vector<Vec> sample_box(const SystemSpec& spec, int count = 64, unsigned seed = 0);

// frame matrix A(q), columns are the frame fields in coordinate components
Mat frame_matrix(const SystemSpec& spec, const Vec& q);
// directional derivative of A along a coordinate direction
Mat frame_matrix_deriv(const SystemSpec& spec, const Vec& q, const Vec& dir);

// [X_a, X_b] = R^c_ab X_c, antisymmetric by construction
Tensor3 bracket_coeffs(const SystemSpec& spec, const Vec& q);

// frame metric g_{alpha beta}(q) (requires validate() to have run)
Mat frame_metric_at(const SystemSpec& spec, const Vec& q);
// X_gamma(g_{alpha beta}) for every gamma
std::vector<Mat> frame_metric_derivs(const SystemSpec& spec, const Vec& q);

// per-point cache of everything the downstream formulas need
struct FrameGeometry {
    Tensor3 R;
    Mat g;        // full frame metric
    Mat g_ab;     // constrained block (m x m)
    Mat g_ai;     // mixed block (m x k)
    Mat g_ij;     // complement block (k x k)
    Mat K;        // K^a_i = -g^{ab} g_{bi} (m x k)
    Mat A;        // frame matrix
    Mat A_inv;
};
FrameGeometry frame_geometry(const SystemSpec& spec, const Vec& q);

// replace the complement columns by X~_i = X_i - g^{ab} g_{bi} X_a (expression level)
SystemSpec orthogonalize(const SystemSpec& spec);

Vec quasi_to_coord(const SystemSpec& spec, const QuasiState& s);
Vec coord_to_quasi(const SystemSpec& spec, const Vec& q, const Vec& qdot);

// expression-matrix helpers (Laplace expansion; intended for small blocks)
Expr expr_det(const std::vector<std::vector<Expr>>& a);
std::vector<std::vector<Expr>> expr_adjugate(const std::vector<std::vector<Expr>>& a);

// light constant-folding constructors used when synthesizing expression trees
Expr ex_add(const Expr& a, const Expr& b);
Expr ex_sub(const Expr& a, const Expr& b);
Expr ex_mul(const Expr& a, const Expr& b);
Expr ex_div(const Expr& a, const Expr& b);

}  // namespace nhext
