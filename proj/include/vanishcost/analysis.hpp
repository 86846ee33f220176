#pragma once

#include <string>
#include <vector>

#include "vanishcost/costlab.hpp"
#include "vanishcost/flow.hpp"
#include "vanishcost/pde.hpp"

namespace vanishcost::analysis {

using geometry::Domain;
using geometry::Grid;
using geometry::Region;
using pde::Slice;
using pde::SolverParams;
using pde::SpaceTimeField;
using velocity::VelocityField;

// Flow-adapted weight theta(x,t) = rho(|Phi(t2,t,x) - x0|) * g(t) with
// rho(q) = min((q-r)_+^2, r^2) and g(t) = 1/(kappa (t2-t) + 1); vanishes on
// the tube D_r of backward images of B(x0,r) and stays above c0 r^2 outside
// D_2r. kappa = 4 exp(2 int ||grad B||) makes dt theta - |grad theta|^2 +
// B.grad theta >= 0 (for B = 0 the bound kappa >= 4 is sharp).
struct AgmonWeight {
    Pt x0;
    double r = 1, t1 = 0, t2 = 1;
    double kappa = 4;
    double c0 = 0;  // measured min of theta / r^2 outside D_2r
    VelocityField field;
    double flow_tol = 1e-9;

    // |Phi(t2, t, x) - x0|
    double pullback_distance(const Pt& x, double t) const;
    double value(const Pt& x, double t) const;
};

AgmonWeight build_theta(const VelocityField& field, const Pt& x0, double r, double t1, double t2);

// Space-time sampling lattice for pointwise residual checks.
struct EvalLattice {
    Pt lo, hi;
    std::array<int, 2> n{21, 21};
    int time_points = 7;
};

// Minimum of the central-difference evaluation of
//   dt theta - |grad theta|^2 + B.grad theta
// over lattice points whose full stencil stays clear of the rho kink
// surfaces (one lattice layer of exclusion around q = r and q = 2r).
double hj_residual(const AgmonWeight& weight, const VelocityField& field, const EvalLattice& lat);

enum class AgmonVariant { A1, A2 };

// Both variants test, with psi = exp(theta/eps) phi slice-wise,
//   e^{-C (t2-t)} ||psi(t)||^2 + c eps int_t^{t2} e^{-C (t2-s)} ||grad psi||^2
//     <= ||psi(t2)||^2
// at every slice t; A2 fixes C = ||div B||_inf and c = 2 (requires B.n >= 0
// on the boundary), A1 fits the smallest admissible C/eps rate with c = 1.
struct AgmonReport {
    AgmonVariant variant = AgmonVariant::A2;
    double C = 0;             // decay rate used (fitted for A1)
    double worst_margin = 0;  // min over t of (RHS - LHS) / RHS
    int worst_slice = 0;
    bool holds = false;  // worst_margin >= -tolerance
    double tolerance = 1e-6;
};

// weight == nullptr means theta = 0 (psi = phi).
AgmonReport agmon_check(const SpaceTimeField& phi, const AgmonWeight* weight,
                        const VelocityField& field, const Domain& domain, AgmonVariant variant,
                        double tolerance = 1e-6);

// ||phi(t0 - T0)|| / ||phi(t0)|| for the annulus solve on Omega \ omega0
// backward over [t0 - T0, t0] from data G.
struct OutsideReport {
    double ratio = 0;
    bool defined = true;  // false when G vanishes on the annulus
    double norm_start = 0, norm_end = 0;
    double epsilon = 0;
};

OutsideReport dissipation_outside(const Grid& grid, const Region& omega0,
                                  const VelocityField& field, const Slice& G, double t0, double T0,
                                  double epsilon, const SolverParams& base);

// Fit of log ratio against 1/eps over an eps list; slope is the measured
// -C0 of the exp(-C0/eps) dissipation rate (expected negative).
struct OutsideSweep {
    std::vector<OutsideReport> rows;
    double slope = 0, intercept = 0, r2 = 0;
};

OutsideSweep dissipation_outside_sweep(const Grid& grid, const Region& omega0,
                                       const VelocityField& field, const Slice& G, double t0,
                                       double T0, const std::vector<double>& eps_list,
                                       const SolverParams& base);

// Smallest C' with ||phi(0)||^2 <= C' (exp(-m C0 / eps) ||phi(t)||^2 +
// ||phi||^2_{L2(omega_T)}) per lattice time t in [m T0, T]; requires a
// satisfied flushing certificate for (T, T0, r0).
struct GlobalReport {
    double C0 = 0;
    int m = 1;
    std::vector<double> t_samples;
    std::vector<double> admissible;  // C'(t)
    double worst = 0;                // max over the lattice
    bool defined = true;             // false when G = 0
};

GlobalReport dissipation_global(const costlab::ProblemSpec& prob, const Slice& G,
                                const flow::FlushingReport& certificate, double T0, double C0,
                                int m, const SolverParams& params);

// Carleman auxiliary function: eta > 0 in Omega, eta = 0 on the boundary,
// ||eta||_inf = 1, critical point inside omega'. 1-D: two parabola pieces
// glued C^1 at the vertex; 2-D: product of the per-axis profiles. delta is
// the sampled infimum of |grad eta| over Omega \ omega', excluding corner
// neighborhoods of radius corner_radius where the product gradient decays.
struct EtaFunction {
    Domain domain;
    int dim = 1;
    std::array<double, 2> vertex{};
    double delta = 0;
    double sup_norm = 1;
    double corner_radius = 0;
    int samples_per_axis = 0;

    double value(const Pt& x) const;
    Pt gradient(const Pt& x) const;
    double normal_derivative(const Pt& boundary_point, const Pt& normal) const;
};

EtaFunction build_eta(const Domain& domain, const Region& omega_prime, int samples_per_axis = 201);

// alpha_pm(x,t) = (e^{6 lambda} - e^{4 lambda +- lambda eta}) / (t (T - t)),
// xi_pm(x,t) = e^{4 lambda +- lambda eta} / (t (T - t)); t in {0, T} maps to
// +infinity. On the boundary eta = 0 collapses both signs to one value.
struct CarlemanWeights {
    EtaFunction eta;
    double lambda = 1, s = 1, T = 1;

    double alpha_plus(const Pt& x, double t) const;
    double alpha_minus(const Pt& x, double t) const;
    double xi_plus(const Pt& x, double t) const;
    double xi_minus(const Pt& x, double t) const;
    double alpha_boundary(double t) const;  // eta = 0
    double xi_boundary(double t) const;
};

CarlemanWeights carleman_weights(const EtaFunction& eta, double lambda, double s, double T);

// Quadrature evaluation of the Carleman estimate's sides for the Hopf
// transform Phi = exp(f / 2 eps) phi:
//   volume_phi  = s^3 l^4 int e^{-2 s a+} xi+^3 |Phi|^2
//   volume_grad = s   l^2 int e^{-2 s a+} xi+   |grad Phi|^2
//   boundary    = s   l^2 int_Gamma dn f |dn eta|^2 (xi + s xi^2) e^{-2 s a} |Phi|^2
//   rhs         = s^3 l^4 int_{omega_T} e^{-2 s a+} xi+^3 |Phi|^2
// The first and last guard_steps time slices are excluded: the weights blow
// up there while the integrand vanishes analytically.
//
// At any admissible s the raw factor e^{-2 s alpha} underflows doubles
// (2 s alpha is of order 1e6), so the common scale e^{-2 s alpha_ref} with
// alpha_ref = min alpha+ over the cell quadrature is factored out of every
// integral: the reported terms are raw * exp(log_scale) and the ratio C_min
// is exact. The gradient term uses the mean of the two adjacent cell
// weights so all renormalized weights stay <= 1.
struct FunctionalReport {
    double volume_phi = 0;
    double volume_grad = 0;
    double boundary = 0;
    double rhs = 0;
    double C_min = 0;
    bool defined = true;      // false when phi vanishes on omega_T
    bool degenerate = false;  // raw weights underflow; values renormalized
    double log_scale = 0;     // 2 s alpha_ref; raw = reported * exp(-log_scale)
    double s = 0, lambda = 0, epsilon = 0;
    double s_threshold = 0;  // (s1 / eps) (T + T^2) C_T(f)
    double s1 = 1;
    int guard_steps = 2;
};

FunctionalReport carleman_functional(const SpaceTimeField& phi,
                                     const velocity::GradientPotential& f, const Region& omega,
                                     const CarlemanWeights& weights, double s1 = 1.0,
                                     int guard_steps = 2);

// Full parameter-constant sum for the Carleman threshold s >=
// (s1/eps)(T+T^2) c_T(f); errors when min dn f <= 0 on the boundary.
double c_T(const velocity::GradientPotential& f, const Domain& domain, double T);

}  // namespace vanishcost::analysis
