#pragma once

#include <string>
#include <vector>

#include "vanishcost/pde.hpp"

namespace vanishcost::costlab {

using geometry::Grid;
using geometry::Region;
using pde::Slice;
using pde::SolverParams;
using pde::SpaceTimeField;
using velocity::VelocityField;

// One controllability instance: grid, observation region, transport field,
// horizon.
struct ProblemSpec {
    Grid grid;
    Region omega;
    VelocityField field;
    double T = 1.0;
};

enum class CostMethod { power_iteration, dense_eigensolve };

struct CostOptions {
    CostMethod method = CostMethod::power_iteration;
    double tolerance = 1e-8;  // outer Rayleigh-quotient tolerance
    int max_iterations = 300;
    double delta = 1e-12;  // B regularization: B + delta tr(B)/n I
};

struct CostEstimate {
    double K = 0;
    CostMethod method = CostMethod::power_iteration;
    int iterations = 0;
    double residual = 0;  // ||A v - mu B v|| / ||A v|| at the final iterate
    double delta = 0;     // regularization shift actually added
    int N = 0, M = 0;
    double T = 0, epsilon = 0;
    bool converged = false;
    std::string flag;  // empty, or "inconclusive"/failure text
};

// K^2 = largest generalized eigenvalue of (A, B) with A(v) = ||phi(0)||^2
// and B(v) = ||phi||^2_{L2(omega x (0,T))}, both induced by solve_adjoint;
// A and B applications use the transpose-exact forward stepper, so the
// quadratic forms are represented without any extra discretization error.
CostEstimate observability_cost(const ProblemSpec& prob, const SolverParams& params,
                                const CostOptions& opts = {});

struct HUMResult {
    SpaceTimeField control;  // u values (adjoint minimizer restricted later by omega fractions)
    SpaceTimeField state;    // steered forward solution
    double y0_norm = 0;
    double terminal_norm = 0;  // ||y(T)||
    double control_norm = 0;   // ||u||_{L2(omega x (0,T))}
    int iterations = 0;
    bool converged = false;
    std::string flag;
};

// Minimal-L2(omega)-norm control steering y0 toward zero at time T: CG on
// the dual functional gradient B phi_T + S* y0 (one adjoint + one forward
// solve per application).
HUMResult hum_control(const Slice& y0, const ProblemSpec& prob, const SolverParams& params,
                      double steering_tol = 1e-6, int max_iterations = 500, double delta = 1e-12);

// sup ||phi(t)|| / ||phi||_{L2(omega x (0,T))}; t = 0 reduces to
// observability_cost. t > 0 requires a time-independent field (the partial
// propagation is realized by a time-shifted forward solve).
double observability_window_ratio(const ProblemSpec& prob, const SolverParams& params, double t,
                                  const CostOptions& opts = {});

struct SweepRow {
    double epsilon = 0, T = 0;
    int N = 0, M = 0;
    double K = 0;
    CostMethod method = CostMethod::power_iteration;
    int iterations = 0;
    double residual = 0;
    std::string flag;
};

// Template for sweeps: the grid is rebuilt per row as N = ceil(c/sqrt(eps)),
// capped by max_cells_per_axis, so the boundary layer stays resolved.
struct SweepSpec {
    geometry::Domain domain;
    Region omega;
    VelocityField field;
    double grid_constant = 4.0;
    int max_cells_per_axis = 2000;
    int steps_per_unit_time = 100;
    int min_steps = 50;
    SolverParams base;  // theta / residual tolerance template
    CostOptions cost;
};

// Rows ordered by descending epsilon (then ascending T); per-row failures
// are captured in the flag, the sweep continues.
std::vector<SweepRow> sweep(const SweepSpec& spec, const std::vector<double>& eps_list,
                            const std::vector<double>& T_list);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

struct FitResult {
    double slope = 0;      // C-hat of log K = C-hat (1/eps) + b
    double intercept = 0;
    double r2 = 0;
    bool r2_defined = true;
    double eps_min = 0, eps_max = 0;
    int rows_used = 0;
    double spread = 0;  // max K / min K
    std::string verdict;  // bounded-trend | blow-up-trend | inconclusive
};

FitResult fit_exponential(const std::vector<SweepRow>& rows);
FitResult boundedness_report(const std::vector<SweepRow>& rows, double slope_threshold = 0.01,
                             double r2_threshold = 0.98);

struct MeanLowerBound {
    bool vacuous = false;
    double lhs = 0;    // ||phi(0)||^2
    double rhs = 0;    // |integral phi_T|^2 / |Omega|
    double margin = 0;
    bool holds = false;
};

MeanLowerBound mean_lower_bound_check(const Slice& phi_T, const ProblemSpec& prob,
                                      const SolverParams& params, double tolerance = 1e-10);

}  // namespace vanishcost::costlab
