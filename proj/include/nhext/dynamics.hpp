#pragma once

// Force coefficients of every vector field in play: geodesic spray,
// nonholonomic dynamics, the SODE extensions, and the Lagrange multipliers.

#include "nhext/connection.hpp"

namespace nhext {

struct ConsistencyError : std::runtime_error {
    double residual;
    explicit ConsistencyError(double r)
        : std::runtime_error("multiplier formulas disagree (residual = " + std::to_string(r) + ")"),
          residual(r) {}
};

enum class SprayKind {
    Geodesic,
    Nonholonomic,
    ExtProjection,     // projection extension
    ExtNhConnection,   // spray of the nonholonomic connection
    ExtBarred,         // spray of the barred connection
    GeodesicOfExtension
};

struct SodeEval {
    SprayKind kind;
    Vec F;  // n force reals in the working frame
};

SodeEval geodesic_forces(const SystemSpec& spec, const QuasiState& state);

// f^a from the constrained Christoffel block; F^i = 0 by convention
SodeEval nonholonomic_forces(const SystemSpec& spec, const Vec& q, const Vec& v_a);

// lambda_i(q, v^a); computed by two independent formulas which must agree
Vec multipliers(const SystemSpec& spec, const Vec& q, const Vec& v_a);

SodeEval extension_forces(const SystemSpec& spec, const QuasiState& state, SprayKind kind);

// geodesic spray of a (completed) metric in the working frame
SodeEval extension_geodesic_forces(const SystemSpec& spec, const MetricField& ghat,
                                   const QuasiState& state);

// projection extension of the geodesic spray of ghat
SodeEval projected_forces(const SystemSpec& spec, const MetricField& ghat,
                          const QuasiState& state);

// one RK4 step of the nonholonomic flow acting on (q, v^a)
std::pair<Vec, Vec> nh_flow_step(const SystemSpec& spec, const Vec& q, const Vec& v_a, double h);

// derivative of phi(q, v^a) along the nonholonomic flow, central-differenced
// over an RK4 micro-step
double flow_derivative(const SystemSpec& spec,
                       const std::function<double(const Vec&, const Vec&)>& phi, const Vec& q,
                       const Vec& v_a, double h = 1e-5);

}  // namespace nhext
