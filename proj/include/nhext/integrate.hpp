#pragma once

// Fixed-step RK4 integration of every spray kind, trajectory comparison, the
// nonholonomic exponential map and its tangent, parallel transport, and the
// Gauss-type checks.

#include <string>

#include "nhext/dynamics.hpp"

namespace nhext {

struct IntegrationFailure : std::runtime_error {
    double t;
    IntegrationFailure(const std::string& msg, double time)
        : std::runtime_error(msg + " at t = " + std::to_string(time)), t(time) {}
};
struct LeftChartBox : IntegrationFailure {
    LeftChartBox(double time) : IntegrationFailure("trajectory left the chart box", time) {}
};
struct NonFiniteState : IntegrationFailure {
    NonFiniteState(double time) : IntegrationFailure("state became non-finite", time) {}
};

struct Trajectory {
    SprayKind kind = SprayKind::Nonholonomic;
    double dt = 0.0;
    std::vector<double> t;
    std::vector<QuasiState> states;
    std::vector<double> energy;      // 1/2 v^T g v in the governing metric
    std::vector<double> vperp_norm;  // |v^i|, the constraint drift monitor
};

// ghat is consulted only by the metric-field kinds (GeodesicOfExtension)
Trajectory integrate(const SystemSpec& spec, SprayKind kind, const QuasiState& state0,
                     double t_end, double dt, const MetricField* ghat = nullptr);

struct ComparisonReport {
    double max_config_dev = 0.0;
    double max_velocity_dev = 0.0;
};
ComparisonReport compare(const SystemSpec& spec, const MetricField& ghat, const Vec& q0,
                         const Vec& v0_in_D, double t_end, double dt);

// exp^nh: endpoint of the unit-time nonholonomic trajectory
Vec nh_exp(const SystemSpec& spec, const Vec& q, const Vec& v_in_D, double dt = 1e-3);
// tangent of exp^nh in frame components at the endpoint (n x m), by central
// differences over the initial quasi-velocities
Mat tangent_exp(const SystemSpec& spec, const Vec& q, const Vec& v_in_D, double dt = 1e-3);

struct TransportState {
    std::vector<double> t;
    std::vector<Vec> W;
    std::vector<Vec> h;  // empty unless covector transport was requested
};
// parallel transport of w0 along the trajectory with the chosen connection;
// h0 (barred kind only) adds covector transport with the multiplier source
TransportState transport(const SystemSpec& spec, ConnectionKind kind, const Trajectory& traj,
                         const Vec& w0, const Vec* h0 = nullptr);

double gauss_check_A(const SystemSpec& spec, const MetricField& ghat, const Vec& q,
                     const Vec& v_in_D, const Vec& u_in_D, double dt = 1e-3);
double gauss_check_B(const SystemSpec& spec, const MetricField& ghat, const Vec& q,
                     const Vec& v_in_D, const Vec& w_in_Dg, double t_end, double dt);

void write_trajectory_csv(const SystemSpec& spec, const Trajectory& traj,
                          const std::string& path);
void write_svg(const std::vector<Trajectory>& trajs, int ix, int iy, const std::string& path);

}  // namespace nhext
