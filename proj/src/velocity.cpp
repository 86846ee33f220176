#include "vanishcost/velocity.hpp"

#include <cmath>
#include <vector>

namespace vanishcost::velocity {

GradientPotential GradientPotential::from_expression(const expr::ExprPtr& f_expr, int dim) {
    GradientPotential p;
    p.dim = dim;
    std::vector<expr::ExprPtr> g(static_cast<size_t>(dim));
    std::vector<std::vector<expr::ExprPtr>> h(static_cast<size_t>(dim),
                                              std::vector<expr::ExprPtr>(static_cast<size_t>(dim)));
    std::vector<expr::ExprPtr> dtg(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        g[static_cast<size_t>(i)] = f_expr->diff(i);
        dtg[static_cast<size_t>(i)] = g[static_cast<size_t>(i)]->diff(3);
        for (int j = 0; j < dim; ++j) h[static_cast<size_t>(i)][static_cast<size_t>(j)] = g[static_cast<size_t>(i)]->diff(j);
    }
    expr::ExprPtr ft = f_expr->diff(3);
    expr::ExprPtr ftt = ft->diff(3);
    p.time_dependent = ft->str() != "0";

    p.f = [f_expr](const Pt& x, double t) { return f_expr->eval(x, t); };
    p.grad = [g, dim](const Pt& x, double t) {
        Pt out = Pt::zero(dim);
        for (int i = 0; i < dim; ++i) out[i] = g[static_cast<size_t>(i)]->eval(x, t);
        return out;
    };
    p.hess = [h, dim](const Pt& x, double t) {
        Mat m = Mat::zero(dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m(i, j) = h[static_cast<size_t>(i)][static_cast<size_t>(j)]->eval(x, t);
        return m;
    };
    p.laplacian = [h, dim](const Pt& x, double t) {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += h[static_cast<size_t>(i)][static_cast<size_t>(i)]->eval(x, t);
        return s;
    };
    p.dt = [ft](const Pt& x, double t) { return ft->eval(x, t); };
    p.dt_grad = [dtg, dim](const Pt& x, double t) {
        Pt out = Pt::zero(dim);
        for (int i = 0; i < dim; ++i) out[i] = dtg[static_cast<size_t>(i)]->eval(x, t);
        return out;
    };
    p.dtt = [ftt](const Pt& x, double t) { return ftt->eval(x, t); };
    return p;
}

VelocityField make_gradient_field(std::shared_ptr<GradientPotential> potential) {
    VelocityField f;
    f.dim = potential->dim;
    f.time_dependent = potential->time_dependent;
    auto pot = potential;
    f.eval = [pot](const Pt& x, double t) { return pot->grad(x, t); };
    f.jacobian = [pot](const Pt& x, double t) { return pot->hess(x, t); };
    f.divergence = [pot](const Pt& x, double t) { return pot->laplacian(x, t); };
    f.potential = std::move(potential);
    return f;
}

VelocityField builtin_field(const std::string& name, int dim) {
    if (name == "quadratic_potential") {
        auto pot = std::make_shared<GradientPotential>();
        pot->dim = dim;
        pot->f = [](const Pt& x, double) { return 0.5 * x.dot(x); };
        pot->grad = [](const Pt& x, double) { return x; };
        pot->hess = [dim](const Pt&, double) {
            Mat m = Mat::zero(dim);
            for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
            return m;
        };
        pot->laplacian = [dim](const Pt&, double) { return static_cast<double>(dim); };
        pot->dt = [](const Pt&, double) { return 0.0; };
        pot->dt_grad = [dim](const Pt&, double) { return Pt::zero(dim); };
        pot->dtt = [](const Pt&, double) { return 0.0; };
        return make_gradient_field(pot);
    }
    if (name == "zero") {
        auto pot = std::make_shared<GradientPotential>();
        pot->dim = dim;
        pot->f = [](const Pt&, double) { return 0.0; };
        pot->grad = [dim](const Pt&, double) { return Pt::zero(dim); };
        pot->hess = [dim](const Pt&, double) { return Mat::zero(dim); };
        pot->laplacian = [](const Pt&, double) { return 0.0; };
        pot->dt = [](const Pt&, double) { return 0.0; };
        pot->dt_grad = [dim](const Pt&, double) { return Pt::zero(dim); };
        pot->dtt = [](const Pt&, double) { return 0.0; };
        return make_gradient_field(pot);
    }
    if (name == "skew_rotation") {
        VelocityField f;
        f.dim = 2;
        f.eval = [](const Pt& x, double) { return Pt(x[1], -x[0]); };
        f.jacobian = [](const Pt&, double) {
            Mat m = Mat::zero(2);
            m(0, 1) = 1.0;
            m(1, 0) = -1.0;
            return m;
        };
        f.divergence = [](const Pt&, double) { return 0.0; };
        return f;
    }
    if (name == "lyapunov_limit_cycle") {
        VelocityField f;
        f.dim = 2;
        // Planar field with an invariant unit circle: radially d/dt r = r(1 - r^2),
        // so the circle is a periodic orbit and backward trajectories from the
        // open unit disk spiral into the origin.
        f.eval = [](const Pt& p, double) {
            double x = p[0], y = p[1], r2 = x * x + y * y;
            return Pt(x - y - x * r2, x + y - y * r2);
        };
        f.jacobian = [](const Pt& p, double) {
            double x = p[0], y = p[1], r2 = x * x + y * y;
            Mat m = Mat::zero(2);
            m(0, 0) = 1 - r2 - 2 * x * x;
            m(0, 1) = -1 - 2 * x * y;
            m(1, 0) = 1 - 2 * x * y;
            m(1, 1) = 1 - r2 - 2 * y * y;
            return m;
        };
        f.divergence = [](const Pt& p, double) {
            double r2 = p[0] * p[0] + p[1] * p[1];
            return 2 - 4 * r2;
        };
        // cubic growth blows up in finite time outside the unit disk; keep
        // runaway trajectories from overflowing before the box check trips
        f.box_lo = {-10, -10, -10};
        f.box_hi = {10, 10, 10};
        return f;
    }
    throw Error(ErrorCode::config_error, "builtin_field: unknown field '" + name + "'");
}

namespace {

// Deterministic interior sample points: tensor lattice plus a Halton shift
// refinement, so refining the density never loses previously seen points.
std::vector<Pt> interior_samples(const geometry::Domain& domain, int per_axis) {
    std::array<double, 3> lo, hi;
    domain.bounding_box(lo, hi);
    std::vector<Pt> pts;
    auto push_if_inside = [&](const Pt& p) {
        if (domain.contains(p)) pts.push_back(p);
    };
    if (domain.dim == 1) {
        for (int i = 0; i < per_axis; ++i)
            push_if_inside(Pt(lo[0] + (hi[0] - lo[0]) * i / (per_axis - 1.0)));
    } else {
        for (int i = 0; i < per_axis; ++i)
            for (int j = 0; j < per_axis; ++j)
                push_if_inside(Pt(lo[0] + (hi[0] - lo[0]) * i / (per_axis - 1.0),
                                  lo[1] + (hi[1] - lo[1]) * j / (per_axis - 1.0)));
    }
    // Halton (base 2,3) refinement points
    auto halton = [](int idx, int base) {
        double f = 1.0, r = 0.0;
        while (idx > 0) {
            f /= base;
            r += f * (idx % base);
            idx /= base;
        }
        return r;
    };
    int extra = per_axis * per_axis / 4 + 8;
    for (int k = 1; k <= extra; ++k) {
        if (domain.dim == 1)
            push_if_inside(Pt(lo[0] + (hi[0] - lo[0]) * halton(k, 2)));
        else
            push_if_inside(Pt(lo[0] + (hi[0] - lo[0]) * halton(k, 2), lo[1] + (hi[1] - lo[1]) * halton(k, 3)));
    }
    return pts;
}

}  // namespace

FieldNorms field_norms(const VelocityField& field, const geometry::Domain& domain, double T,
                       int samples_per_axis, int boundary_samples, int time_samples) {
    FieldNorms out;
    auto pts = interior_samples(domain, samples_per_axis);
    auto bnd = domain.boundary_samples(boundary_samples);
    out.min_Bn = std::numeric_limits<double>::infinity();
    out.min_dnf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < time_samples; ++k) {
        double t = T * k / std::max(1, time_samples - 1);
        for (const auto& p : pts) {
            out.sup_B = std::max(out.sup_B, field.eval(p, t).norm());
            out.sup_grad_B = std::max(out.sup_grad_B, field.jacobian(p, t).frobenius());
            out.C_B = std::max(out.C_B, std::fabs(field.divergence(p, t)));
            ++out.samples;
        }
        for (const auto& [p, n] : bnd) {
            out.min_Bn = std::min(out.min_Bn, field.eval(p, t).dot(n));
            if (field.potential) out.min_dnf = std::min(out.min_dnf, field.potential->normal_derivative(p, n, t));
            ++out.samples;
        }
    }
    if (!field.potential) {
        out.min_dnf = std::numeric_limits<double>::quiet_NaN();
        out.c_T = std::numeric_limits<double>::quiet_NaN();
        out.c_T_available = false;
        return out;
    }
    if (out.min_dnf <= 0) {
        // ||(dn f)^{-1}|| undefined; C_T flagged unavailable rather than inf.
        out.c_T = std::numeric_limits<double>::quiet_NaN();
        out.c_T_available = false;
        return out;
    }
    out.c_T = c_T_constant(*field.potential, domain, T, samples_per_axis, boundary_samples, time_samples);
    out.c_T_available = true;
    return out;
}

double c_T_constant(const GradientPotential& potential, const geometry::Domain& domain, double T,
                    int samples_per_axis, int boundary_samples, int time_samples) {
    auto pts = interior_samples(domain, samples_per_axis);
    auto bnd = domain.boundary_samples(boundary_samples);
    double sup_grad = 0, sup_hess = 0, sup_dtgrad = 0, sup_dtt = 0, sup_lap = 0, sup_dt = 0;
    double sup_dtdn = 0, min_dnf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < time_samples; ++k) {
        double t = T * k / std::max(1, time_samples - 1);
        for (const auto& p : pts) {
            sup_grad = std::max(sup_grad, potential.grad(p, t).norm());
            sup_hess = std::max(sup_hess, potential.hess(p, t).frobenius());
            sup_dtgrad = std::max(sup_dtgrad, potential.dt_grad(p, t).norm());
            sup_dtt = std::max(sup_dtt, std::fabs(potential.dtt(p, t)));
            sup_lap = std::max(sup_lap, std::fabs(potential.laplacian(p, t)));
            sup_dt = std::max(sup_dt, std::fabs(potential.dt(p, t)));
        }
        for (const auto& [p, n] : bnd) {
            double dnf = potential.normal_derivative(p, n, t);
            min_dnf = std::min(min_dnf, dnf);
            sup_dtdn = std::max(sup_dtdn, std::fabs(potential.dt_grad(p, t).dot(n)));
        }
    }
    require(min_dnf > 0, ErrorCode::numerical_failure,
            "c_T: min dn f <= 0 on the boundary, constant undefined");
    return 1.0 + sup_grad + sup_hess + std::pow(sup_dtgrad, 2.0 / 3.0) + std::pow(sup_grad, 2.0 / 3.0) +
           std::pow(sup_dtt, 1.0 / 3.0) + std::pow(sup_lap, 2.0 / 3.0) + std::sqrt(sup_dt) + sup_dtdn +
           1.0 / min_dnf;
}

}  // namespace vanishcost::velocity
