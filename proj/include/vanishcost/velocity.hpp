#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "vanishcost/common.hpp"
#include "vanishcost/expr.hpp"
#include "vanishcost/geometry.hpp"

namespace vanishcost::velocity {

// Scalar potential f(x,t) with all the derivatives the Hopf transform and
// the Carleman constant need.
struct GradientPotential {
    int dim = 1;
    std::function<double(const Pt&, double)> f;
    std::function<Pt(const Pt&, double)> grad;
    std::function<Mat(const Pt&, double)> hess;
    std::function<double(const Pt&, double)> laplacian;
    std::function<double(const Pt&, double)> dt;
    std::function<Pt(const Pt&, double)> dt_grad;
    std::function<double(const Pt&, double)> dtt;
    bool time_dependent = false;

    double normal_derivative(const Pt& x, const Pt& n, double t) const { return grad(x, t).dot(n); }

    // Builds every evaluator by symbolic differentiation of the expression.
    static GradientPotential from_expression(const expr::ExprPtr& f_expr, int dim);
};

// Velocity field B(x,t) with Jacobian and divergence evaluators; gradient
// fields carry their potential for the Hopf transform and Carleman constant.
struct VelocityField {
    int dim = 1;
    std::function<Pt(const Pt&, double)> eval;
    std::function<Mat(const Pt&, double)> jacobian;
    std::function<double(const Pt&, double)> divergence;
    std::shared_ptr<GradientPotential> potential;  // null for non-gradient fields
    bool time_dependent = false;
    // Fields must be evaluable on a bounding box strictly containing the
    // closure of Omega; flow integration errors past these bounds.
    std::array<double, 3> box_lo{-1e100, -1e100, -1e100};
    std::array<double, 3> box_hi{1e100, 1e100, 1e100};

    bool in_box(const Pt& p) const {
        for (int i = 0; i < dim; ++i)
            if (p[i] < box_lo[static_cast<size_t>(i)] || p[i] > box_hi[static_cast<size_t>(i)]) return false;
        return true;
    }
};

VelocityField make_gradient_field(std::shared_ptr<GradientPotential> potential);

// Builtins: quadratic_potential (grad |x|^2/2, any dim via dim arg),
// skew_rotation (y,-x), lyapunov_limit_cycle, zero.
VelocityField builtin_field(const std::string& name, int dim = 2);

// Sampled sup/inf norms over the closure of Omega x [0,T].
struct FieldNorms {
    double sup_B = 0;        // ||B||_inf
    double sup_grad_B = 0;   // ||grad B||_inf (Frobenius per point)
    double C_B = 0;          // ||div B||_inf
    double min_Bn = 0;       // min over Gamma x [0,T] of B.n
    double min_dnf = 0;      // min over Gamma x [0,T] of dn f (NaN without potential)
    double c_T = 0;          // full constant sum; NaN when unavailable
    bool c_T_available = false;
    long samples = 0;
};

FieldNorms field_norms(const VelocityField& field, const geometry::Domain& domain, double T,
                       int samples_per_axis = 33, int boundary_samples = 64, int time_samples = 17);

// The Carleman parameter constant: 1 + ||grad f|| + ||hess f|| +
// ||grad dt f||^{2/3} + ||grad f||^{2/3} + ||dtt f||^{1/3} + ||lap f||^{2/3}
// + ||dt f||^{1/2} + ||dt dn f||_Gamma + ||(dn f)^{-1}||_Gamma.
// Errors when min dn f <= 0 on the boundary.
double c_T_constant(const GradientPotential& potential, const geometry::Domain& domain, double T,
                    int samples_per_axis = 33, int boundary_samples = 64, int time_samples = 17);

}  // namespace vanishcost::velocity
