#include "vanishcost/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace vanishcost::expr {

namespace {

class Const : public Expr {
public:
    explicit Const(double c) : c_(c) {}
    double eval(const Pt&, double) const override { return c_; }
    ExprPtr diff(int) const override { return std::make_shared<Const>(0.0); }
    std::string str() const override {
        std::ostringstream os;
        os << c_;
        return os.str();
    }
    double value() const { return c_; }

private:
    double c_;
};

bool is_const(const ExprPtr& e, double v) {
    auto c = std::dynamic_pointer_cast<Const>(e);
    return c && c->value() == v;
}

class Var : public Expr {
public:
    explicit Var(int idx) : idx_(idx) {}
    double eval(const Pt& x, double t) const override { return idx_ == 3 ? t : x[idx_]; }
    ExprPtr diff(int var) const override { return std::make_shared<Const>(var == idx_ ? 1.0 : 0.0); }
    std::string str() const override { return idx_ == 3 ? "t" : "x" + std::to_string(idx_ + 1); }

private:
    int idx_;
};

class Binary : public Expr {
public:
    Binary(char op, ExprPtr a, ExprPtr b) : op_(op), a_(std::move(a)), b_(std::move(b)) {}
    double eval(const Pt& x, double t) const override {
        double u = a_->eval(x, t), v = b_->eval(x, t);
        switch (op_) {
            case '+': return u + v;
            case '-': return u - v;
            case '*': return u * v;
            case '/': return u / v;
            case '^': return std::pow(u, v);
        }
        return 0.0;
    }
    ExprPtr diff(int var) const override;
    std::string str() const override { return "(" + a_->str() + op_ + b_->str() + ")"; }

private:
    char op_;
    ExprPtr a_, b_;
};

class Unary : public Expr {
public:
    Unary(std::string fn, ExprPtr a) : fn_(std::move(fn)), a_(std::move(a)) {}
    double eval(const Pt& x, double t) const override {
        double u = a_->eval(x, t);
        if (fn_ == "exp") return std::exp(u);
        if (fn_ == "sin") return std::sin(u);
        if (fn_ == "cos") return std::cos(u);
        if (fn_ == "abs") return std::fabs(u);
        if (fn_ == "neg") return -u;
        if (fn_ == "sign") return u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
        return 0.0;
    }
    ExprPtr diff(int var) const override;
    std::string str() const override { return fn_ + "(" + a_->str() + ")"; }

private:
    std::string fn_;
    ExprPtr a_;
};

ExprPtr mk2(char op, ExprPtr a, ExprPtr b) {
    // Light simplification keeps derivative trees from exploding.
    if (op == '+') {
        if (is_const(a, 0)) return b;
        if (is_const(b, 0)) return a;
    }
    if (op == '-' && is_const(b, 0)) return a;
    if (op == '*') {
        if (is_const(a, 0) || is_const(b, 0)) return std::make_shared<Const>(0.0);
        if (is_const(a, 1)) return b;
        if (is_const(b, 1)) return a;
    }
    if (op == '/' && is_const(a, 0)) return std::make_shared<Const>(0.0);
    auto ca = std::dynamic_pointer_cast<Const>(a);
    auto cb = std::dynamic_pointer_cast<Const>(b);
    if (ca && cb) {
        Pt p = Pt::zero(3);
        return std::make_shared<Const>(Binary(op, a, b).eval(p, 0.0));
    }
    return std::make_shared<Binary>(op, std::move(a), std::move(b));
}

ExprPtr mk1(const std::string& fn, ExprPtr a) { return std::make_shared<Unary>(fn, std::move(a)); }

ExprPtr Binary::diff(int var) const {
    ExprPtr da = a_->diff(var), db = b_->diff(var);
    switch (op_) {
        case '+': return mk2('+', da, db);
        case '-': return mk2('-', da, db);
        case '*': return mk2('+', mk2('*', da, b_), mk2('*', a_, db));
        case '/':
            return mk2('/', mk2('-', mk2('*', da, b_), mk2('*', a_, db)), mk2('*', b_, b_));
        case '^': {
            // Only constant exponents are differentiated (documented limit).
            auto cb = std::dynamic_pointer_cast<Const>(b_);
            require(cb != nullptr, ErrorCode::config_error,
                    "expression: '^' requires a constant exponent for differentiation");
            double p = cb->value();
            return mk2('*', mk2('*', std::make_shared<Const>(p), mk2('^', a_, std::make_shared<Const>(p - 1))), da);
        }
    }
    return constant(0);
}

ExprPtr Unary::diff(int var) const {
    ExprPtr da = a_->diff(var);
    if (fn_ == "exp") return mk2('*', mk1("exp", a_), da);
    if (fn_ == "sin") return mk2('*', mk1("cos", a_), da);
    if (fn_ == "cos") return mk2('*', mk1("neg", mk1("sin", a_)), da);
    if (fn_ == "abs") return mk2('*', mk1("sign", a_), da);
    if (fn_ == "neg") return mk1("neg", da);
    if (fn_ == "sign") return constant(0);
    return constant(0);
}

struct Parser {
    const std::string& s;
    size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool peek(char c) {
        skip();
        return pos < s.size() && s[pos] == c;
    }
    bool take(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) {
        throw Error(ErrorCode::config_error,
                    "expression parse error at column " + std::to_string(pos + 1) + ": " + msg);
    }

    ExprPtr expression() {
        ExprPtr e = term();
        while (true) {
            if (take('+'))
                e = mk2('+', e, term());
            else if (take('-'))
                e = mk2('-', e, term());
            else
                return e;
        }
    }
    ExprPtr term() {
        ExprPtr e = power();
        while (true) {
            if (take('*'))
                e = mk2('*', e, power());
            else if (take('/'))
                e = mk2('/', e, power());
            else
                return e;
        }
    }
    ExprPtr power() {
        ExprPtr e = unary();
        if (take('^')) return mk2('^', e, power());  // right associative
        return e;
    }
    ExprPtr unary() {
        if (take('-')) return mk1("neg", unary());
        if (take('+')) return unary();
        return atom();
    }
    ExprPtr atom() {
        skip();
        if (pos >= s.size()) fail("unexpected end of input");
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t end;
            double v = std::stod(s.substr(pos), &end);
            pos += end;
            return std::make_shared<Const>(v);
        }
        if (c == '(') {
            ++pos;
            ExprPtr e = expression();
            if (!take(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t start = pos;
            while (pos < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            std::string name = s.substr(start, pos - start);
            if (name == "t") return std::make_shared<Var>(3);
            if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '3')
                return std::make_shared<Var>(name[1] - '1');
            if (name == "x") return std::make_shared<Var>(0);  // convenient 1-D alias
            if (name == "exp" || name == "sin" || name == "cos" || name == "abs") {
                if (!take('(')) fail("expected '(' after " + name);
                ExprPtr e = expression();
                if (!take(')')) fail("expected ')'");
                return mk1(name, e);
            }
            fail("unknown identifier '" + name + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

}  // namespace

ExprPtr parse(const std::string& text) {
    Parser p(text);
    ExprPtr e = p.expression();
    p.skip();
    if (p.pos != text.size()) p.fail("trailing input");
    return e;
}

ExprPtr constant(double c) { return std::make_shared<Const>(c); }

}  // namespace vanishcost::expr
