#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vanishcost/geometry.hpp"
#include "vanishcost/velocity.hpp"

namespace vanishcost::flow {

using velocity::VelocityField;

// Sampled solution of the characteristic ODE, with dense output via cubic
// Hermite interpolation between accepted steps. Times are monotone in the
// direction of integration (decreasing for backward runs).
struct Trajectory {
    Pt anchor;
    double t0 = 0, t1 = 0;
    std::vector<double> times;
    std::vector<Pt> points;
    std::vector<Pt> derivs;  // B at each sample, for Hermite interpolation
    long steps = 0;
    double max_local_error = 0;

    Pt at(double t) const;
    Pt end() const { return points.back(); }
};

// Integrates d/dt Phi = B(Phi, t) from (x0, t0) to t1 (either direction).
// Throws numerical_failure with the exit time if the trajectory leaves the
// field's bounding box.
Trajectory integrate_flow(const VelocityField& field, const Pt& x0, double t0, double t1,
                          double tolerance = 1e-9, double max_step = 0.1);

// Convenience endpoint evaluation Phi(t1, t0, x0).
Pt flow_map(const VelocityField& field, double t1, double t0, const Pt& x0, double tolerance = 1e-9);

struct GronwallReport {
    double worst_margin = 0;  // min over pairs/times of (bound - |difference|)
    long pairs = 0;
    bool holds(double slack) const { return worst_margin >= -slack; }
};

// Checks the flow continuity bound
//   |Phi(t,t0,x0) - Phi(t,s0,y0)| <= exp(||grad B|| T) (||B|| |t0-s0| + |x0-y0|)
// on sampled t for every supplied anchor pair.
GronwallReport check_gronwall(const VelocityField& field,
                              const std::vector<std::pair<std::pair<Pt, double>, std::pair<Pt, double>>>& pairs,
                              double T, double sup_B, double sup_grad_B, int time_samples = 33);

// Earliest time in (a,b) at which the trajectory lies in the open region;
// located by a sign-change scan on the region distance followed by bisection
// to 1e-9 absolute. Returns nullopt if no entry is detected at scan
// resolution.
std::optional<double> entry_time(const Trajectory& traj, const geometry::Region& region, double a, double b,
                                 int scan_points = 256);

// Maximal sub-intervals of (a,b) during which the trajectory is inside the
// open region (endpoints resolved conservatively).
std::vector<std::pair<double, double>> inside_intervals(const Trajectory& traj, const geometry::Region& region,
                                                        double a, double b, int scan_points = 256);

enum class FlushingVerdict { satisfied, violated, inconclusive };

struct FlushingReport {
    FlushingVerdict verdict = FlushingVerdict::inconclusive;
    double T = 0, T0 = 0, r0 = 0;
    std::string lattice_description;
    std::string warning;
    struct Witness {
        Pt x0;
        double t0;
        double common_window = 0;  // measure of the common entry window (satisfied)
        double entry = 0;          // a common entry time t* (satisfied only)
    };
    std::vector<Witness> violations;    // ball never simultaneously inside O
    std::vector<Witness> certificates;  // entry time per lattice anchor
    long lattice_points = 0;
    double min_common_window = 0;  // robustness indicator
};

struct LatticeSpec {
    int space_per_axis = 21;
    int time_points = 5;
    int shell_points = 0;  // 0 = default per dimension (2 / 16 / 64)
    int scan_points = 256;
    double ode_tolerance = 1e-8;
};

// Numerical certification/refutation of the flushing condition: for every
// lattice anchor (x0, t0) in closure(Omega) x [T0, T], all samples of
// closed-ball(x0, r0) must visit O at a common time in (t0 - T0, t0).
FlushingReport check_flushing(const VelocityField& field, const geometry::Domain& omega_domain,
                              const geometry::Region& target, double T, double T0, double r0,
                              const LatticeSpec& lattice = {});

struct AutonomousParams {
    bool satisfied = false;
    double T0 = 0, r0 = 0;
    Pt refuting_point;  // valid when !satisfied
    double max_entry_time = 0;
};

// Prop-style characterization for autonomous fields: per-point backward
// entry times give T0 (x 1.1 safety) and a lattice-verified continuity
// radius r0. Refutation carries a witness that never enters O before the
// horizon cap.
AutonomousParams autonomous_flushing_params(const VelocityField& field, const geometry::Domain& omega_domain,
                                            const geometry::Region& target, double horizon_cap,
                                            const LatticeSpec& lattice = {});

struct TubeQuery {
    Pt x0;
    double r = 0, t1 = 0, t2 = 0;
};

// (x,t) lies in the tube D_r(x0,t1,t2) iff |Phi(t2,t,x) - x0| <= r.
bool tube_membership(const TubeQuery& query, const VelocityField& field, const Pt& x, double t,
                     double tolerance = 1e-9);

}  // namespace vanishcost::flow
