#pragma once

#include <memory>
#include <string>

#include "vanishcost/common.hpp"

namespace vanishcost::expr {

// Symbolic expression over {x1..x3, t, +, -, *, /, ^, exp, sin, cos, abs}.
// Small enough to differentiate symbolically, which is how gradient-form
// potentials get their Hessians and time derivatives.
class Expr {
public:
    virtual ~Expr() = default;
    virtual double eval(const Pt& x, double t) const = 0;
    virtual std::shared_ptr<Expr> diff(int var) const = 0;  // var: 0..2 spatial, 3 = t
    virtual std::string str() const = 0;
};

using ExprPtr = std::shared_ptr<Expr>;

// Parses the mini-language; throws Error(config_error) with a column hint on
// malformed input or identifiers outside the documented set.
ExprPtr parse(const std::string& text);

ExprPtr constant(double c);

}  // namespace vanishcost::expr
