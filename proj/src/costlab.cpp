#include "vanishcost/costlab.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace vanishcost::costlab {

namespace {

using Vec = std::vector<double>;

const char* method_name(CostMethod m) {
    return m == CostMethod::power_iteration ? "power-iteration" : "dense-eigensolve";
}

// Quadratic-form machinery shared by the cost estimators: every operator
// application is one adjoint solve plus one (transpose-exact) forward solve,
// so A and B are self-adjoint in the L2 inner product by construction.
struct Ops {
    const ProblemSpec& prob;
    const SolverParams& params;
    int n;
    double vol;
    double shift = 0;  // delta * tr(B)/n estimate

    Ops(const ProblemSpec& p, const SolverParams& s, double delta) : prob(p), params(s) {
        n = prob.grid.cell_count();
        vol = prob.grid.cell_volume();
        require(omega_overlap() > 0, ErrorCode::config_error,
                "observability: omega does not overlap the grid");
        if (delta > 0) {
            // average-eigenvalue estimate from a constant probe
            Vec ones(n, 1.0);
            double tr = ip(apply_B_raw(ones), ones) / ip(ones, ones);
            shift = delta * std::max(tr, std::numeric_limits<double>::min());
        }
    }

    double omega_overlap() const {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += prob.grid.cell_fraction(i, prob.omega);
        return acc;
    }

    double ip(const Vec& a, const Vec& b) const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += a[i] * b[i];
        return s * vol;
    }
    double norm(const Vec& a) const { return std::sqrt(ip(a, a)); }

    SpaceTimeField adjoint(const Vec& v) const {
        return pde::solve_adjoint(prob.grid, v, prob.field, params, prob.T);
    }
    Vec apply_A(const Vec& v) const {
        auto phi = adjoint(v);
        return pde::solve_forward(prob.grid, phi.front(), prob.field, params, prob.T).back();
    }
    Vec apply_B_raw(const Vec& v) const {
        auto phi = adjoint(v);
        return pde::solve_forward(prob.grid, Vec(n, 0.0), prob.field, params, prob.T, &prob.omega, &phi)
            .back();
    }
    Vec apply_B(const Vec& v) const {
        Vec w = apply_B_raw(v);
        for (int i = 0; i < n; ++i) w[i] += shift * v[i];
        return w;
    }
    // propagate y0 through the uncontrolled forward system (the L2 adjoint
    // of phi_T -> phi(0))
    Vec star(const Vec& y0) const {
        return pde::solve_forward(prob.grid, y0, prob.field, params, prob.T).back();
    }

    // CG for B z = rhs; returns iterations, stops at absolute residual tol
    int cg_B(const Vec& rhs, Vec& z, double abs_tol, int max_iter) const {
        z.assign(n, 0.0);
        Vec r = rhs, p = rhs, Bp;
        double rr = ip(r, r);
        int it = 0;
        for (; it < max_iter && std::sqrt(rr) > abs_tol; ++it) {
            Bp = apply_B(p);
            double pBp = ip(p, Bp);
            require(pBp > 0, ErrorCode::numerical_failure,
                    "observability: observation form indefinite beyond regularization");
            double alpha = rr / pBp;
            for (int i = 0; i < n; ++i) {
                z[i] += alpha * p[i];
                r[i] -= alpha * Bp[i];
            }
            double rr2 = ip(r, r);
            double beta = rr2 / rr;
            rr = rr2;
            for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        }
        return it;
    }
};

CostEstimate power_cost(const Ops& ops, const ProblemSpec& prob, const SolverParams& params,
                        const CostOptions& opts, const std::function<Vec(const Vec&)>& applyA) {
    CostEstimate est;
    est.method = CostMethod::power_iteration;
    est.delta = ops.shift;
    est.N = prob.grid.cell_count();
    est.M = params.M;
    est.T = prob.T;
    est.epsilon = params.epsilon;

    require(opts.max_iterations >= 2, ErrorCode::config_error,
            "observability: max_iterations must be at least 2");
    require(opts.tolerance > 0, ErrorCode::config_error, "observability: tolerance must be positive");

    int n = ops.n;
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * std::sin(1.0 + i);
    double nv = ops.norm(v);
    for (auto& x : v) x /= nv;

    double mu = 0, mu_prev = -1, d_prev = 0;
    Vec Av, Bv;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        Av = applyA(v);
        Bv = ops.apply_B(v);
        double denom = ops.ip(Bv, v);
        require(denom > 0, ErrorCode::numerical_failure,
                "observability: observation form indefinite beyond regularization");
        mu = ops.ip(Av, v) / denom;
        // geometric extrapolation of the Rayleigh-quotient error: successive
        // increments shrink by the eigenvalue ratio, so the remaining error
        // is about d * rho / (1 - rho)
        double d = std::fabs(mu - mu_prev);
        double err = d;
        if (it > 1 && d > 0 && d < d_prev) {
            double rho = d / d_prev;
            err = d * rho / (1 - rho);
        }
        if (it > 0 && err <= opts.tolerance * std::max(mu, 1e-300)) {
            est.converged = true;
            ++it;
            break;
        }
        d_prev = d;
        mu_prev = mu;
        Vec z;
        double scale = ops.norm(Av);
        ops.cg_B(Av, z, opts.tolerance / 10 * std::max(scale, 1e-300), std::max(10 * n, 200));
        double nz = ops.norm(z);
        require(nz > 0, ErrorCode::numerical_failure, "observability: power iterate vanished");
        for (int i = 0; i < n; ++i) v[i] = z[i] / nz;
    }
    est.iterations = it;
    double rnum = 0;
    for (int i = 0; i < n; ++i) {
        double r = Av[i] - mu * Bv[i];
        rnum += r * r;
    }
    est.residual = std::sqrt(rnum * ops.vol) / std::max(ops.norm(Av), 1e-300);
    est.K = std::sqrt(std::max(mu, 0.0));
    if (!est.converged) est.flag = "inconclusive";
    return est;
}

}  // namespace

CostEstimate observability_cost(const ProblemSpec& prob, const SolverParams& params,
                                const CostOptions& opts) {
    Ops ops(prob, params, opts.delta);
    if (opts.method == CostMethod::power_iteration)
        return power_cost(ops, prob, params, opts, [&](const Vec& v) { return ops.apply_A(v); });

    int n = ops.n;
    require(n <= 2500, ErrorCode::config_error,
            "observability: dense eigensolve guarded at dimension 2500");
    Eigen::MatrixXd A(n, n), B(n, n);
    for (int j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        auto phi = ops.adjoint(e);
        Vec a = pde::solve_forward(prob.grid, phi.front(), prob.field, params, prob.T).back();
        Vec b = pde::solve_forward(prob.grid, Vec(n, 0.0), prob.field, params, prob.T, &prob.omega, &phi)
                    .back();
        for (int i = 0; i < n; ++i) {
            A(i, j) = a[i];
            B(i, j) = b[i] + (i == j ? ops.shift : 0.0);
        }
    }
    A = 0.5 * (A + A.transpose()).eval();
    B = 0.5 * (B + B.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B);
    require(es.info() == Eigen::Success, ErrorCode::numerical_failure,
            "observability: dense generalized eigensolve failed");
    double mu = es.eigenvalues().maxCoeff();

    CostEstimate est;
    est.method = CostMethod::dense_eigensolve;
    est.K = std::sqrt(std::max(mu, 0.0));
    est.delta = ops.shift;
    est.N = n;
    est.M = params.M;
    est.T = prob.T;
    est.epsilon = params.epsilon;
    est.iterations = 1;
    est.residual = 0;
    est.converged = true;
    return est;
}

HUMResult hum_control(const Slice& y0, const ProblemSpec& prob, const SolverParams& params,
                      double steering_tol, int max_iterations, double delta) {
    HUMResult res;
    Ops ops(prob, params, delta);
    res.y0_norm = ops.norm(y0);
    if (res.y0_norm == 0) {
        res.control = pde::solve_adjoint(prob.grid, Vec(ops.n, 0.0), prob.field, params, prob.T);
        res.state = pde::solve_forward(prob.grid, y0, prob.field, params, prob.T);
        res.converged = true;
        return res;
    }
    // terminal state is y(T) = S* y0 + B q for control u = phi(q)|omega, so
    // CG on B q = -S* y0 drives ||y(T)|| to the residual level
    Vec g = ops.star(y0);
    int n = ops.n;
    Vec q(n, 0.0);
    double target = 0.5 * steering_tol * res.y0_norm;
    // restarted CG on the true residual: the recursively updated CG residual
    // drifts below the actual one over long runs, so each sweep recomputes
    // -S* y0 - B q exactly before continuing
    while (res.iterations < max_iterations) {
        Vec r = ops.apply_B(q);
        for (int i = 0; i < n; ++i) r[i] = -g[i] - r[i];
        if (ops.norm(r) <= target) break;
        Vec dq;
        int burst = std::min(60, max_iterations - res.iterations);
        int its = ops.cg_B(r, dq, target * 0.5, burst);
        res.iterations += std::max(its, 1);
        for (int i = 0; i < n; ++i) q[i] += dq[i];
        if (its == 0) break;
    }

    auto phi = ops.adjoint(q);
    res.control = phi;
    res.state = pde::solve_forward(prob.grid, y0, prob.field, params, prob.T, &prob.omega, &phi);
    res.terminal_norm = ops.norm(res.state.back());
    res.control_norm = pde::omega_norm(phi, prob.omega);
    res.converged = res.terminal_norm <= steering_tol * res.y0_norm;
    if (!res.converged) res.flag = "steering tolerance not reached";
    return res;
}

double observability_window_ratio(const ProblemSpec& prob, const SolverParams& params, double t,
                                  const CostOptions& opts) {
    require(t >= 0 && t < prob.T, ErrorCode::config_error, "window ratio: t outside [0, T)");
    Ops ops(prob, params, opts.delta);
    if (t == 0)
        return power_cost(ops, prob, params, opts, [&](const Vec& v) { return ops.apply_A(v); }).K;
    require(!prob.field.time_dependent, ErrorCode::config_error,
            "window ratio at t > 0 requires a time-independent field");
    double dt = prob.T / params.M;
    int k = static_cast<int>(std::lround(t / dt));
    require(k >= 0 && k <= params.M - 2, ErrorCode::config_error,
            "window ratio: t too close to T for the step count");
    SolverParams tail = params;
    tail.M = params.M - k;
    auto applyAt = [&](const Vec& v) {
        auto phi = ops.adjoint(v);
        return pde::solve_forward(prob.grid, phi.slices[k], prob.field, tail, prob.T - t).back();
    };
    return power_cost(ops, prob, params, opts, applyAt).K;
}

std::vector<SweepRow> sweep(const SweepSpec& spec, const std::vector<double>& eps_list,
                            const std::vector<double>& T_list) {
    require(!eps_list.empty() && !T_list.empty(), ErrorCode::config_error, "sweep: empty parameter list");
    for (double e : eps_list)
        require(e > 0, ErrorCode::config_error, "sweep: epsilon must be positive");
    for (double T : T_list) require(T > 0, ErrorCode::config_error, "sweep: T must be positive");

    std::vector<double> eps = eps_list;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    std::vector<double> Ts = T_list;
    std::sort(Ts.begin(), Ts.end());

    std::vector<SweepRow> rows;
    for (double e : eps)
        for (double T : Ts) {
            SweepRow row;
            row.epsilon = e;
            row.T = T;
            row.method = spec.cost.method;
            int N = static_cast<int>(std::ceil(spec.grid_constant / std::sqrt(e)));
            N = std::clamp(N, 2, spec.max_cells_per_axis);
            row.N = N;
            int M = std::max({2, spec.min_steps,
                              static_cast<int>(std::lround(T * spec.steps_per_unit_time))});
            row.M = M;
            try {
                ProblemSpec prob{geometry::build_grid(spec.domain, {N, spec.domain.dim == 2 ? N : 1}),
                                 spec.omega, spec.field, T};
                SolverParams p = spec.base;
                p.epsilon = e;
                p.M = M;
                auto est = observability_cost(prob, p, spec.cost);
                row.K = est.K;
                row.iterations = est.iterations;
                row.residual = est.residual;
                row.flag = est.flag;
            } catch (const Error& err) {
                row.K = std::numeric_limits<double>::quiet_NaN();
                row.flag = err.what();
            }
            rows.push_back(std::move(row));
        }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), ErrorCode::config_error, "cannot open " + path + " for writing");
    os.precision(17);
    os << "epsilon,T,N,M,K,method,iterations,residual,flag\n";
    for (const auto& r : rows)
        os << r.epsilon << ',' << r.T << ',' << r.N << ',' << r.M << ',' << r.K << ','
           << method_name(r.method) << ',' << r.iterations << ',' << r.residual << ',' << r.flag << '\n';
}

FitResult fit_exponential(const std::vector<SweepRow>& rows) {
    std::vector<const SweepRow*> use;
    for (const auto& r : rows)
        if (r.flag.empty() && std::isfinite(r.K) && r.K > 0) use.push_back(&r);
    require(use.size() >= 4, ErrorCode::config_error, "fit: need at least 4 usable rows");
    for (const auto* r : use)
        require(r->T == use.front()->T, ErrorCode::config_error, "fit: rows must share the horizon T");

    double eps_min = use.front()->epsilon, eps_max = eps_min;
    for (const auto* r : use) {
        eps_min = std::min(eps_min, r->epsilon);
        eps_max = std::max(eps_max, r->epsilon);
    }
    require(eps_max > eps_min, ErrorCode::config_error, "fit: degenerate epsilon list");

    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = static_cast<double>(use.size());
    for (const auto* r : use) {
        double x = 1.0 / r->epsilon, y = std::log(r->K);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    FitResult fit;
    fit.rows_used = static_cast<int>(use.size());
    fit.eps_min = eps_min;
    fit.eps_max = eps_max;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_tot = 0, ss_res = 0, ybar = sy / n;
    double kmin = std::numeric_limits<double>::infinity(), kmax = 0;
    for (const auto* r : use) {
        double x = 1.0 / r->epsilon, y = std::log(r->K);
        ss_tot += (y - ybar) * (y - ybar);
        double e = y - (fit.slope * x + fit.intercept);
        ss_res += e * e;
        kmin = std::min(kmin, r->K);
        kmax = std::max(kmax, r->K);
    }
    fit.spread = kmax / kmin;
    if (ss_tot <= 1e-28 * std::max(1.0, ybar * ybar)) {
        fit.r2_defined = false;
        fit.r2 = 0;
    } else {
        fit.r2 = 1.0 - ss_res / ss_tot;
    }
    return fit;
}

FitResult boundedness_report(const std::vector<SweepRow>& rows, double slope_threshold,
                             double r2_threshold) {
    FitResult fit = fit_exponential(rows);
    if (std::fabs(fit.slope) <= slope_threshold)
        fit.verdict = "bounded-trend";
    else if (fit.slope >= slope_threshold && fit.r2_defined && fit.r2 >= r2_threshold)
        fit.verdict = "blow-up-trend";
    else
        fit.verdict = "inconclusive";
    return fit;
}

MeanLowerBound mean_lower_bound_check(const Slice& phi_T, const ProblemSpec& prob,
                                      const SolverParams& params, double tolerance) {
    MeanLowerBound rep;
    double m = pde::mass(prob.grid, phi_T);
    double measure = prob.grid.domain_measure();
    double scale = pde::l2_norm(prob.grid, phi_T) * std::sqrt(measure);
    if (std::fabs(m) <= 1e-13 * std::max(scale, 1e-300)) {
        rep.vacuous = true;
        return rep;
    }
    auto phi = pde::solve_adjoint(prob.grid, phi_T, prob.field, params, prob.T);
    double l0 = pde::l2_norm(prob.grid, phi.front());
    rep.lhs = l0 * l0;
    rep.rhs = m * m / measure;
    rep.margin = rep.lhs - rep.rhs;
    rep.holds = rep.margin >= -tolerance * std::max(rep.rhs, 1.0);
    return rep;
}

}  // namespace vanishcost::costlab
