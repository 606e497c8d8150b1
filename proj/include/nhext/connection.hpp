#pragma once

// Christoffel tables in the anholonomic frame: Levi-Civita via Koszul's
// formula, the nonholonomic connection, and the barred connection.

#include <functional>

#include "nhext/geometry.hpp"

namespace nhext {

struct SingularMetric : GeometryError {
    using GeometryError::GeometryError;
};

enum class ConnectionKind { LeviCivita, Nonholonomic, Barred };

struct ChristoffelTable {
    ConnectionKind kind = ConnectionKind::LeviCivita;
    int n = 0;
    std::vector<double> gamma;  // entry order (c, alpha, beta)

    ChristoffelTable(ConnectionKind k, int dim)
        : kind(k), n(dim), gamma(static_cast<size_t>(dim) * dim * dim, 0.0) {}
    double& operator()(int c, int a, int b) {
        return gamma[(static_cast<size_t>(c) * n + a) * n + b];
    }
    double operator()(int c, int a, int b) const {
        return gamma[(static_cast<size_t>(c) * n + a) * n + b];
    }
};

// A (possibly non-expression) metric in the working frame. Downstream code
// needs values and frame-directional derivatives; completed metrics plug in
// here and reuse every connection/spray formula.
class MetricField {
public:
    virtual ~MetricField() = default;
    virtual Mat at(const Vec& q) const = 0;
    // X_gamma(g_{alpha beta}) for every gamma; A is the frame matrix at q
    virtual std::vector<Mat> frame_derivs(const Vec& q, const Mat& A) const = 0;
};

// frame-metric entries given as expressions over the spec's chart
class ExprMetricField : public MetricField {
public:
    ExprMetricField(const SystemSpec& spec, std::vector<std::vector<Expr>> entries)
        : spec_(&spec), entries_(std::move(entries)) {}
    Mat at(const Vec& q) const override;
    std::vector<Mat> frame_derivs(const Vec& q, const Mat& A) const override;

private:
    const SystemSpec* spec_;
    std::vector<std::vector<Expr>> entries_;
};

// the spec's own (synthesized) frame metric
ExprMetricField base_metric(const SystemSpec& spec);

// numeric g(q) with central finite differences for the derivatives
class CallableMetricField : public MetricField {
public:
    CallableMetricField(std::function<Mat(const Vec&)> f, double fd_step = 1e-6)
        : f_(std::move(f)), h_(fd_step) {}
    Mat at(const Vec& q) const override { return f_(q); }
    std::vector<Mat> frame_derivs(const Vec& q, const Mat& A) const override;

private:
    std::function<Mat(const Vec&)> f_;
    double h_;
};

// Koszul solve 2 g_{mu gamma} Gamma^mu_{alpha beta} = K_{gamma alpha beta}
ChristoffelTable levi_civita(const SystemSpec& spec, const MetricField& g, const Vec& q);
ChristoffelTable levi_civita(const SystemSpec& spec, const Vec& q);

// block rules applied to a Levi-Civita table
ChristoffelTable nonholonomic_from(const ChristoffelTable& lc, int m);
ChristoffelTable barred_from(const ChristoffelTable& lc, const Tensor3& R, int m);

ChristoffelTable nonholonomic_connection(const SystemSpec& spec, const Vec& q);
ChristoffelTable barred_connection(const SystemSpec& spec, const Vec& q);

}  // namespace nhext
