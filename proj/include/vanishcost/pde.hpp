#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vanishcost/geometry.hpp"
#include "vanishcost/velocity.hpp"

namespace vanishcost::pde {

using geometry::Grid;
using geometry::Region;
using velocity::GradientPotential;
using velocity::VelocityField;

using Slice = std::vector<double>;

struct SolverParams {
    double epsilon = 1.0;
    int M = 2;
    double theta = 0.5;           // Crank-Nicolson diffusion weight
    double residual_tol = 1e-10;  // max linear-solve residual, (0, 1e-6]

    void validate() const;
};

enum class FieldTag { state, adjoint, annulus_adjoint };

// M+1 time slices of cell values over [t1,t2], plus the run metadata needed
// to reproduce or serialize it.
struct SpaceTimeField {
    Grid grid;
    FieldTag tag = FieldTag::state;
    double t1 = 0, t2 = 0;
    double epsilon = 0;
    std::vector<double> times;   // strictly increasing, size M+1
    std::vector<Slice> slices;   // time-major, size M+1
    double courant = 0;          // max advective Courant number seen
    std::string warning;         // set when courant > 2

    int steps() const { return static_cast<int>(times.size()) - 1; }
    const Slice& front() const { return slices.front(); }  // t = t1
    const Slice& back() const { return slices.back(); }    // t = t2

    void save(const std::string& path) const;
    static SpaceTimeField load(const std::string& path);
    void export_tsv(const std::string& path) const;
};

// Split source F = f0 + eps * sum_i d/dx_i f_i for the annulus system.
struct AnnulusSource {
    std::function<double(const Pt&, double)> f0;
    std::vector<std::function<double(const Pt&, double)>> fvec;
};

// Backward solve of  dt phi + eps lap phi + div(phi B) = 0  over [0,T] from
// the terminal slice phi_T, with the zero-total-flux boundary condition
// (eps grad phi + phi B).n = 0 discretized so every boundary face flux
// vanishes identically: discrete mass is time-invariant to machine
// precision.
SpaceTimeField solve_adjoint(const Grid& grid, const Slice& phi_T, const VelocityField& field,
                             const SolverParams& params, double T);

// Same backward solver on U = Omega \ closure(inner): cells inside `inner`
// are masked to zero, interface faces get a homogeneous Dirichlet ghost
// reflection, the outer boundary keeps the zero-flux condition. An empty
// inner region reproduces solve_adjoint exactly. `source`, when present, is
// added as f0 + eps * (face-difference divergence of fvec).
SpaceTimeField solve_annulus(const Grid& grid, const Slice& G, const VelocityField& field,
                             const SolverParams& params, double t1, double t2, const Region& inner,
                             const AnnulusSource* source = nullptr);

// Forward solve of  dt y - eps lap y + B.grad y = u 1_omega  over [0,T] with
// homogeneous Neumann walls. Each step is the transpose of the corresponding
// adjoint step, so the duality pairing
//   (y(T), phi_T) - (y0, phi(0)) = sum_k w_k (u_k, phi_k)_omega
// holds exactly in the discrete trapezoid quadrature. `control` supplies the
// slices of u (same grid/steps), restricted to omega by exact cell
// fractions; pass nullptr for the uncontrolled system.
SpaceTimeField solve_forward(const Grid& grid, const Slice& y0, const VelocityField& field,
                             const SolverParams& params, double T, const Region* omega = nullptr,
                             const SpaceTimeField* control = nullptr);

double mass(const Grid& grid, const Slice& s);
double l2_norm(const Grid& grid, const Slice& s);
// Discrete gradient seminorm: face-difference quadrature of |grad phi|^2.
double h1_seminorm(const Grid& grid, const Slice& s);
// L2(omega x (t1,t2)) norm: trapezoidal in time, exact cell fractions in
// space.
double omega_norm(const SpaceTimeField& f, const Region& omega);
// Trapezoid weights w_0..w_M for the field's time axis.
std::vector<double> time_weights(const SpaceTimeField& f);

struct HopfCoefficients {
    std::function<double(const Pt&, double)> a_eps;  // V(f)/eps - lap f / 2
    std::function<double(const Pt&, double)> V;      // |grad f|^2/4 + dt f/2
    std::function<double(const Pt&, const Pt&, double)> b;  // dn f / 2
};

HopfCoefficients hopf_coefficients(const GradientPotential& f, double eps);

// Slice-wise Phi = exp(f/2eps) phi; errors when any exponent argument
// exceeds 700.
SpaceTimeField hopf_transform(const SpaceTimeField& phi, const GradientPotential& f, double eps);
SpaceTimeField hopf_inverse(const SpaceTimeField& Phi, const GradientPotential& f, double eps);

struct EnergyReport {
    double sup_l2 = 0;        // max_t ||phi(t)||
    double grad_term = 0;     // sqrt(eps) ||grad phi||_{L2(t1,t2;L2)}
    double lhs = 0;           // sum of the two
    double data_norm = 0;     // ||G|| + ||F||
    double envelope_rate = 0; // C(eps,B) = ||B||^2/eps + eps + 1
    double admissible_c = 0;  // smallest C with lhs <= C exp(C dt rate) data
    bool trivial = false;     // zero data and zero solution
};

// extra_source_norm adds ||F|| on top of the terminal-slice norm.
EnergyReport energy_check(const SpaceTimeField& f, const VelocityField& field, const SolverParams& params,
                          double extra_source_norm = 0);

}  // namespace vanishcost::pde
