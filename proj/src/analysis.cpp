#include "vanishcost/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vanishcost/flow.hpp"

namespace vanishcost::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double frobenius(const Mat& m, int dim) {
    double s = 0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

double rho(double q, double r) {
    double d = q - r;
    if (d <= 0) return 0;
    return std::min(d * d, r * r);
}

// least squares y = a x + b with coefficient of determination
void line_fit(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b,
              double& r2) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    b = (sy - a * sx) / n;
    double ybar = sy / n, st = 0, sr = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        st += (y[i] - ybar) * (y[i] - ybar);
        double e = y[i] - (a * x[i] + b);
        sr += e * e;
    }
    r2 = st > 0 ? 1.0 - sr / st : 1.0;
}

}  // namespace

double AgmonWeight::pullback_distance(const Pt& x, double t) const {
    if (t >= t2) return (x - x0).norm();
    try {
        auto traj = flow::integrate_flow(field, x, t, t2, flow_tol);
        return (traj.at(t2) - x0).norm();
    } catch (const Error& e) {
        throw Error(ErrorCode::numerical_failure,
                    "theta: flow left the field box from (" + std::to_string(x[0]) +
                        (x.dim > 1 ? "," + std::to_string(x[1]) : std::string()) + ", t=" +
                        std::to_string(t) + "): " + e.what());
    }
}

double AgmonWeight::value(const Pt& x, double t) const {
    double g = 1.0 / (kappa * (t2 - t) + 1.0);
    return rho(pullback_distance(x, t), r) * g;
}

AgmonWeight build_theta(const VelocityField& field, const Pt& x0, double r, double t1, double t2) {
    require(r > 0 && t2 > t1, ErrorCode::config_error, "build_theta: need r > 0 and t2 > t1");
    AgmonWeight w;
    w.x0 = x0;
    w.r = r;
    w.t1 = t1;
    w.t2 = t2;
    w.field = field;

    // int_{t1}^{t2} ||grad B(., s)||_inf ds by trapezoid over sampled sups
    int dim = field.dim;
    const int nt = 17, nx = 9;
    double integral = 0, prev = 0;
    for (int k = 0; k < nt; ++k) {
        double t = t1 + (t2 - t1) * k / (nt - 1);
        double sup = 0;
        int count = dim == 1 ? nx : nx * nx;
        for (int idx = 0; idx < count; ++idx) {
            Pt p = Pt::zero(2);
            p.dim = dim;
            p[0] = x0[0] + 4 * r * (2.0 * (idx % nx) / (nx - 1) - 1.0);
            if (dim == 2) p[1] = x0[1] + 4 * r * (2.0 * (idx / nx) / (nx - 1) - 1.0);
            if (!field.in_box(p)) continue;
            sup = std::max(sup, frobenius(field.jacobian(p, t), dim));
        }
        if (k > 0) integral += 0.5 * (sup + prev) * (t2 - t1) / (nt - 1);
        prev = sup;
    }
    w.kappa = 4.0 * std::exp(2.0 * integral);

    // measured c0 over sampled points outside D_2r
    double c0 = kInf;
    const int mt = 7, mx = 9;
    for (int k = 0; k < mt; ++k) {
        double t = t1 + (t2 - t1) * k / (mt - 1);
        int count = field.dim == 1 ? mx : mx * mx;
        for (int idx = 0; idx < count; ++idx) {
            Pt p = Pt::zero(2);
            p.dim = field.dim;
            p[0] = x0[0] + 4 * r * (2.0 * (idx % mx) / (mx - 1) - 1.0);
            if (field.dim == 2) p[1] = x0[1] + 4 * r * (2.0 * (idx / mx) / (mx - 1) - 1.0);
            if (!field.in_box(p)) continue;
            if (w.pullback_distance(p, t) < 2 * r) continue;
            c0 = std::min(c0, w.value(p, t) / (r * r));
        }
    }
    w.c0 = std::isfinite(c0) ? c0 : 0.0;
    return w;
}

double hj_residual(const AgmonWeight& weight, const VelocityField& field, const EvalLattice& lat) {
    int dim = field.dim;
    double hx = (lat.hi[0] - lat.lo[0]) / (lat.n[0] - 1);
    double hy = dim == 2 ? (lat.hi[1] - lat.lo[1]) / (lat.n[1] - 1) : 0;
    double span = weight.t2 - weight.t1;
    double ht = span / (lat.time_points + 1);

    double best = kInf;
    int ny = dim == 2 ? lat.n[1] : 1;
    for (int k = 1; k <= lat.time_points; ++k) {
        double t = weight.t1 + k * ht;
        for (int j = (dim == 2 ? 1 : 0); j < (dim == 2 ? ny - 1 : 1); ++j)
            for (int i = 1; i < lat.n[0] - 1; ++i) {
                Pt p = Pt::zero(2);
                p.dim = dim;
                p[0] = lat.lo[0] + i * hx;
                if (dim == 2) p[1] = lat.lo[1] + j * hy;

                // stencil pullback distances; skip if the rho kinks q = r
                // or q = 2r cut through the stencil
                std::vector<std::pair<Pt, double>> pts;
                pts.push_back({p, t});
                Pt px = p;
                px[0] += hx;
                pts.push_back({px, t});
                px[0] -= 2 * hx;
                pts.push_back({px, t});
                if (dim == 2) {
                    Pt py = p;
                    py[1] += hy;
                    pts.push_back({py, t});
                    py[1] -= 2 * hy;
                    pts.push_back({py, t});
                }
                pts.push_back({p, t + ht});
                pts.push_back({p, t - ht});

                double qmin = kInf, qmax = -kInf;
                for (auto& [xx, tt] : pts) {
                    double q = weight.pullback_distance(xx, tt);
                    qmin = std::min(qmin, q);
                    qmax = std::max(qmax, q);
                }
                double r = weight.r;
                if ((qmin < r && qmax > r) || (qmin < 2 * r && qmax > 2 * r)) continue;

                double c = weight.value(p, t);
                double dxp = weight.value(pts[1].first, t), dxm = weight.value(pts[2].first, t);
                Pt grad = Pt::zero(2);
                grad.dim = dim;
                grad[0] = (dxp - dxm) / (2 * hx);
                if (dim == 2) {
                    double dyp = weight.value(pts[3].first, t), dym = weight.value(pts[4].first, t);
                    grad[1] = (dyp - dym) / (2 * hy);
                }
                double dtp = weight.value(p, t + ht), dtm = weight.value(p, t - ht);
                double dt = (dtp - dtm) / (2 * ht);
                (void)c;
                double res = dt - grad.dot(grad) + field.eval(p, t).dot(grad);
                best = std::min(best, res);
            }
    }
    return std::isfinite(best) ? best : 0.0;
}

namespace {

// worst relative margin of e^{-C(t2-t)} n2(t) + c eps int e^{-C(t2-s)} g2
// <= n2(t2) over the slices
double agmon_margin(const std::vector<double>& times, const std::vector<double>& n2,
                    const std::vector<double>& g2, double C, double c, double eps, int& worst_k) {
    int M = static_cast<int>(times.size()) - 1;
    double t2 = times[M];
    double rhs = n2[M];
    double scale = std::max(rhs, 1e-300);
    double worst = kInf;
    for (int k = 0; k <= M; ++k) {
        double integral = 0;
        for (int j = k; j < M; ++j) {
            double dt = times[j + 1] - times[j];
            double a = std::exp(-C * (t2 - times[j])) * g2[j];
            double b = std::exp(-C * (t2 - times[j + 1])) * g2[j + 1];
            integral += 0.5 * (a + b) * dt;
        }
        double lhs = std::exp(-C * (t2 - times[k])) * n2[k] + c * eps * integral;
        double m = (rhs - lhs) / scale;
        if (m < worst) {
            worst = m;
            worst_k = k;
        }
    }
    return worst;
}

}  // namespace

AgmonReport agmon_check(const SpaceTimeField& phi, const AgmonWeight* weight,
                        const VelocityField& field, const Domain& domain, AgmonVariant variant,
                        double tolerance) {
    AgmonReport rep;
    rep.variant = variant;
    rep.tolerance = tolerance;
    double eps = phi.epsilon;
    int M = phi.steps();
    int n = phi.grid.cell_count();

    std::vector<double> n2(M + 1), g2(M + 1);
    for (int k = 0; k <= M; ++k) {
        Slice psi(n);
        for (int i = 0; i < n; ++i) {
            double th = weight ? weight->value(phi.grid.cell_center(i), phi.times[k]) : 0.0;
            require(std::fabs(th / eps) <= 700, ErrorCode::numerical_failure,
                    "agmon_check: exp(theta/eps) overflows");
            psi[i] = std::exp(th / eps) * phi.slices[k][i];
        }
        double l2 = pde::l2_norm(phi.grid, psi);
        n2[k] = l2 * l2;
        double h1 = pde::h1_seminorm(phi.grid, psi);
        g2[k] = h1 * h1;
    }

    auto norms = velocity::field_norms(field, domain, phi.t2);
    if (variant == AgmonVariant::A2) {
        require(norms.min_Bn >= -1e-9, ErrorCode::config_error,
                "agmon_check: A2 requires B.n >= 0 on the boundary");
        rep.C = norms.C_B;
        rep.worst_margin = agmon_margin(phi.times, n2, g2, rep.C, 2.0, eps, rep.worst_slice);
    } else {
        // smallest decay rate making the inequality hold (margin is
        // monotone increasing in C)
        double lo = 0, hi = 1;
        int k = 0;
        while (agmon_margin(phi.times, n2, g2, hi, 1.0, eps, k) < 0 && hi < 1e12) hi *= 2;
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            if (agmon_margin(phi.times, n2, g2, mid, 1.0, eps, k) >= 0)
                hi = mid;
            else
                lo = mid;
        }
        rep.C = hi;
        rep.worst_margin = agmon_margin(phi.times, n2, g2, rep.C, 1.0, eps, rep.worst_slice);
    }
    rep.holds = rep.worst_margin >= -tolerance;
    return rep;
}

OutsideReport dissipation_outside(const Grid& grid, const Region& omega0,
                                  const VelocityField& field, const Slice& G, double t0, double T0,
                                  double epsilon, const SolverParams& base) {
    require(T0 > 0 && T0 < t0, ErrorCode::config_error,
            "dissipation_outside: need 0 < T0 < t0");
    SolverParams p = base;
    p.epsilon = epsilon;
    auto phi = pde::solve_annulus(grid, G, field, p, t0 - T0, t0, omega0);
    OutsideReport rep;
    rep.epsilon = epsilon;
    rep.norm_end = pde::l2_norm(grid, phi.back());
    rep.norm_start = pde::l2_norm(grid, phi.front());
    if (rep.norm_end == 0) {
        rep.defined = false;
        return rep;
    }
    rep.ratio = rep.norm_start / rep.norm_end;
    return rep;
}

OutsideSweep dissipation_outside_sweep(const Grid& grid, const Region& omega0,
                                       const VelocityField& field, const Slice& G, double t0,
                                       double T0, const std::vector<double>& eps_list,
                                       const SolverParams& base) {
    OutsideSweep sw;
    std::vector<double> x, y;
    for (double e : eps_list) {
        auto rep = dissipation_outside(grid, omega0, field, G, t0, T0, e, base);
        sw.rows.push_back(rep);
        if (rep.defined && rep.ratio > 0) {
            x.push_back(1.0 / e);
            y.push_back(std::log(rep.ratio));
        }
    }
    require(x.size() >= 2, ErrorCode::config_error,
            "dissipation_outside_sweep: need at least 2 usable ratios");
    line_fit(x, y, sw.slope, sw.intercept, sw.r2);
    return sw;
}

GlobalReport dissipation_global(const costlab::ProblemSpec& prob, const Slice& G,
                                const flow::FlushingReport& certificate, double T0, double C0,
                                int m, const SolverParams& params) {
    require(certificate.verdict == flow::FlushingVerdict::satisfied,
            ErrorCode::certificate_refusal,
            "dissipation_global: flushing certificate not satisfied");
    require(m >= 1 && m <= prob.T / T0 + 1e-12, ErrorCode::config_error,
            "dissipation_global: need 1 <= m <= T / T0");

    auto phi = pde::solve_adjoint(prob.grid, G, prob.field, params, prob.T);
    double obs = pde::omega_norm(phi, prob.omega);
    double n0 = pde::l2_norm(prob.grid, phi.front());
    double decay = std::exp(-m * C0 / params.epsilon);

    GlobalReport rep;
    rep.C0 = C0;
    rep.m = m;
    rep.defined = n0 > 0 || obs > 0;
    for (int k = 0; k <= phi.steps(); ++k) {
        double t = phi.times[k];
        if (t < m * T0 - 1e-12) continue;
        double nt = pde::l2_norm(prob.grid, phi.slices[k]);
        double denom = decay * nt * nt + obs * obs;
        rep.t_samples.push_back(t);
        rep.admissible.push_back(denom > 0 ? n0 * n0 / denom : 0.0);
    }
    require(!rep.admissible.empty(), ErrorCode::config_error,
            "dissipation_global: no slice times in [m T0, T]");
    rep.worst = *std::max_element(rep.admissible.begin(), rep.admissible.end());
    return rep;
}

namespace {

// per-axis profile: two parabolas glued with value 1 and slope 0 at the
// vertex, vanishing at both endpoints
double profile(double x, double a, double b, double c) {
    double w = x <= c ? c - a : b - c;
    double d = (x - c) / w;
    return 1.0 - d * d;
}

double profile_grad(double x, double a, double b, double c) {
    double w = x <= c ? c - a : b - c;
    return -2.0 * (x - c) / (w * w);
}

}  // namespace

double EtaFunction::value(const Pt& x) const {
    double v = profile(x[0], domain.lo[0], domain.hi[0], vertex[0]);
    if (dim == 2) v *= profile(x[1], domain.lo[1], domain.hi[1], vertex[1]);
    return v;
}

Pt EtaFunction::gradient(const Pt& x) const {
    Pt g = Pt::zero(2);
    g.dim = dim;
    double p0 = profile(x[0], domain.lo[0], domain.hi[0], vertex[0]);
    double d0 = profile_grad(x[0], domain.lo[0], domain.hi[0], vertex[0]);
    if (dim == 1) {
        g[0] = d0;
        return g;
    }
    double p1 = profile(x[1], domain.lo[1], domain.hi[1], vertex[1]);
    double d1 = profile_grad(x[1], domain.lo[1], domain.hi[1], vertex[1]);
    g[0] = d0 * p1;
    g[1] = p0 * d1;
    return g;
}

double EtaFunction::normal_derivative(const Pt& boundary_point, const Pt& normal) const {
    return gradient(boundary_point).dot(normal);
}

EtaFunction build_eta(const Domain& domain, const Region& omega_prime, int samples_per_axis) {
    require(domain.kind != geometry::DomainKind::disk, ErrorCode::config_error,
            "build_eta: interval or rectangle domains only");
    require(!omega_prime.parts.empty(), ErrorCode::config_error, "build_eta: empty omega'");

    // bounding box of omega', must lie strictly inside the domain
    std::array<double, 2> blo{kInf, kInf}, bhi{-kInf, -kInf};
    for (const auto& part : omega_prime.parts)
        for (int a = 0; a < domain.dim; ++a) {
            double lo = part.is_ball ? part.center[a] - part.radius : part.lo[static_cast<size_t>(a)];
            double hi = part.is_ball ? part.center[a] + part.radius : part.hi[static_cast<size_t>(a)];
            blo[static_cast<size_t>(a)] = std::min(blo[static_cast<size_t>(a)], lo);
            bhi[static_cast<size_t>(a)] = std::max(bhi[static_cast<size_t>(a)], hi);
        }
    for (int a = 0; a < domain.dim; ++a)
        require(blo[static_cast<size_t>(a)] > domain.lo[static_cast<size_t>(a)] &&
                    bhi[static_cast<size_t>(a)] < domain.hi[static_cast<size_t>(a)],
                ErrorCode::config_error, "build_eta: omega' must be compactly inside the domain");

    EtaFunction eta;
    eta.domain = domain;
    eta.dim = domain.dim;
    eta.samples_per_axis = samples_per_axis;
    double hmax = 0;
    for (int a = 0; a < domain.dim; ++a) {
        eta.vertex[static_cast<size_t>(a)] =
            0.5 * (blo[static_cast<size_t>(a)] + bhi[static_cast<size_t>(a)]);
        hmax = std::max(hmax, (domain.hi[static_cast<size_t>(a)] - domain.lo[static_cast<size_t>(a)]) /
                                  samples_per_axis);
    }
    eta.corner_radius = domain.dim == 2 ? 2 * hmax : 0.0;

    // sampled infimum of |grad eta| over Omega \ omega' (cell-centered so
    // the exact corners, where the product gradient vanishes, are excluded
    // together with their corner_radius neighborhood)
    double delta = kInf;
    int ny = domain.dim == 2 ? samples_per_axis : 1;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < samples_per_axis; ++i) {
            Pt p = Pt::zero(2);
            p.dim = domain.dim;
            p[0] = domain.lo[0] +
                   (domain.hi[0] - domain.lo[0]) * (i + 0.5) / samples_per_axis;
            if (domain.dim == 2)
                p[1] = domain.lo[1] +
                       (domain.hi[1] - domain.lo[1]) * (j + 0.5) / samples_per_axis;
            if (omega_prime.contains_open(p)) continue;
            if (domain.dim == 2) {
                bool near_corner = false;
                for (int cx = 0; cx < 2 && !near_corner; ++cx)
                    for (int cy = 0; cy < 2 && !near_corner; ++cy) {
                        double dx = p[0] - (cx ? domain.hi[0] : domain.lo[0]);
                        double dy = p[1] - (cy ? domain.hi[1] : domain.lo[1]);
                        near_corner = std::sqrt(dx * dx + dy * dy) < eta.corner_radius;
                    }
                if (near_corner) continue;
            }
            delta = std::min(delta, eta.gradient(p).norm());
        }
    eta.delta = delta;
    require(eta.delta > 0, ErrorCode::numerical_failure,
            "build_eta: sampled gradient infimum is not positive");
    return eta;
}

double CarlemanWeights::alpha_plus(const Pt& x, double t) const {
    if (t <= 0 || t >= T) return kInf;
    double e = eta.value(x);
    return (std::exp(6 * lambda) - std::exp(4 * lambda + lambda * e)) / (t * (T - t));
}

double CarlemanWeights::alpha_minus(const Pt& x, double t) const {
    if (t <= 0 || t >= T) return kInf;
    double e = eta.value(x);
    return (std::exp(6 * lambda) - std::exp(4 * lambda - lambda * e)) / (t * (T - t));
}

double CarlemanWeights::xi_plus(const Pt& x, double t) const {
    if (t <= 0 || t >= T) return kInf;
    return std::exp(4 * lambda + lambda * eta.value(x)) / (t * (T - t));
}

double CarlemanWeights::xi_minus(const Pt& x, double t) const {
    if (t <= 0 || t >= T) return kInf;
    return std::exp(4 * lambda - lambda * eta.value(x)) / (t * (T - t));
}

double CarlemanWeights::alpha_boundary(double t) const {
    if (t <= 0 || t >= T) return kInf;
    return (std::exp(6 * lambda) - std::exp(4 * lambda)) / (t * (T - t));
}

double CarlemanWeights::xi_boundary(double t) const {
    if (t <= 0 || t >= T) return kInf;
    return std::exp(4 * lambda) / (t * (T - t));
}

CarlemanWeights carleman_weights(const EtaFunction& eta, double lambda, double s, double T) {
    require(lambda >= 1 && s >= 1 && T > 0, ErrorCode::config_error,
            "carleman_weights: need lambda >= 1, s >= 1, T > 0");
    CarlemanWeights w;
    w.eta = eta;
    w.lambda = lambda;
    w.s = s;
    w.T = T;
    return w;
}

double c_T(const velocity::GradientPotential& f, const Domain& domain, double T) {
    return velocity::c_T_constant(f, domain, T);
}

FunctionalReport carleman_functional(const SpaceTimeField& phi,
                                     const velocity::GradientPotential& f, const Region& omega,
                                     const CarlemanWeights& weights, double s1, int guard_steps) {
    FunctionalReport rep;
    rep.s = weights.s;
    rep.lambda = weights.lambda;
    rep.epsilon = phi.epsilon;
    rep.s1 = s1;
    rep.guard_steps = guard_steps;

    const Grid& g = phi.grid;
    Domain domain = g.dim == 1 ? Domain::interval(g.lo[0], g.hi[0])
                               : Domain::rectangle(g.lo[0], g.hi[0], g.lo[1], g.hi[1]);
    double T = weights.T;
    rep.s_threshold = (s1 / phi.epsilon) * (T + T * T) * c_T(f, domain, T);
    require(weights.s >= rep.s_threshold * (1 - 1e-12), ErrorCode::config_error,
            "carleman_functional: s below the (s1/eps)(T+T^2) C_T(f) threshold");
    int M = phi.steps();
    require(2 * guard_steps < M, ErrorCode::config_error,
            "carleman_functional: guard band swallows every time step");

    auto Phi = pde::hopf_transform(phi, f, phi.epsilon);

    double s = weights.s, l = weights.lambda;
    double s3l4 = s * s * s * l * l * l * l, sl2 = s * l * l;
    double vol = g.cell_volume();
    int n = g.cell_count();

    // common scale: minimal alpha over the cell quadrature, factored out so
    // the renormalized weights exp(-2s(alpha - alpha_ref)) stay in [0,1]
    double alpha_ref = kInf;
    for (int k = guard_steps; k <= M - guard_steps; ++k)
        for (int i = 0; i < n; ++i)
            alpha_ref = std::min(alpha_ref, weights.alpha_plus(g.cell_center(i), phi.times[k]));
    rep.log_scale = 2 * s * alpha_ref;
    rep.degenerate = rep.log_scale > 700;  // raw weights underflow doubles

    auto faces = g.boundary_faces();
    std::vector<double> cw(static_cast<size_t>(n));
    for (int k = guard_steps; k <= M - guard_steps; ++k) {
        double t = phi.times[k];
        double wl = k > guard_steps ? phi.times[k] - phi.times[k - 1] : 0;
        double wr = k < M - guard_steps ? phi.times[k + 1] - phi.times[k] : 0;
        double wt = 0.5 * (wl + wr);
        const Slice& u = Phi.slices[k];

        for (int i = 0; i < n; ++i) {
            Pt x = g.cell_center(i);
            double ew = std::exp(-2 * s * (weights.alpha_plus(x, t) - alpha_ref));
            cw[static_cast<size_t>(i)] = ew;
            double xi = weights.xi_plus(x, t);
            double cell = ew * xi * xi * xi * u[i] * u[i] * vol * wt;
            rep.volume_phi += s3l4 * cell;
            double frac = g.cell_fraction(i, omega);
            if (frac > 0) rep.rhs += s3l4 * cell * frac;
        }

        // face-based gradient quadrature; the face weight averages the two
        // adjacent cell weights so it never exceeds the cell maximum
        for (int axis = 0; axis < g.dim; ++axis) {
            int nx = g.n[0], nyy = g.dim == 2 ? g.n[1] : 1;
            double h = g.h[static_cast<size_t>(axis)];
            int imax = axis == 0 ? nx - 1 : nx;
            int jmax = axis == 0 ? nyy : nyy - 1;
            for (int j = 0; j < jmax; ++j)
                for (int i = 0; i < imax; ++i) {
                    int c0 = g.index(i, j);
                    int c1 = axis == 0 ? g.index(i + 1, j) : g.index(i, j + 1);
                    Pt x = g.cell_center(c0);
                    x[axis] += 0.5 * h;
                    double d = (u[c1] - u[c0]) / h;
                    double ew =
                        0.5 * (cw[static_cast<size_t>(c0)] + cw[static_cast<size_t>(c1)]);
                    rep.volume_grad += sl2 * ew * weights.xi_plus(x, t) * d * d * vol * wt;
                }
        }

        double xib = weights.xi_boundary(t);
        double ewb = std::exp(-2 * s * (weights.alpha_boundary(t) - alpha_ref));
        for (const auto& face : faces) {
            Pt nrm = face.normal();
            double dnf = f.normal_derivative(face.center, nrm, t);
            double dne = weights.eta.normal_derivative(face.center, nrm);
            double val = u[face.cell];
            rep.boundary +=
                sl2 * dnf * dne * dne * (xib + s * xib * xib) * ewb * val * val * face.area * wt;
        }
    }

    rep.defined = rep.rhs > 0;
    if (rep.defined) rep.C_min = (rep.volume_phi + rep.volume_grad + rep.boundary) / rep.rhs;
    return rep;
}

}  // namespace vanishcost::analysis
