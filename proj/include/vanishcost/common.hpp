#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vanishcost {

// Error taxonomy shared by all modules. `code` maps onto the CLI exit codes:
// config_error -> 2, certificate_refusal -> 3, numerical_failure -> 4.
enum class ErrorCode { config_error = 2, certificate_refusal = 3, numerical_failure = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) throw Error(code, msg);
}

// Point in up to 3 spatial dimensions. Cheap value type used in hot loops
// (flow integration evaluates millions of these).
struct Pt {
    int dim = 0;
    std::array<double, 3> v{0.0, 0.0, 0.0};

    Pt() = default;
    explicit Pt(double x) : dim(1), v{x, 0.0, 0.0} {}
    Pt(double x, double y) : dim(2), v{x, y, 0.0} {}
    Pt(double x, double y, double z) : dim(3), v{x, y, z} {}

    double& operator[](int i) { return v[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<size_t>(i)]; }

    Pt& operator+=(const Pt& o) {
        for (int i = 0; i < dim; ++i) v[static_cast<size_t>(i)] += o[i];
        return *this;
    }
    friend Pt operator+(Pt a, const Pt& b) { return a += b; }
    friend Pt operator-(Pt a, const Pt& b) {
        for (int i = 0; i < a.dim; ++i) a[i] -= b[i];
        return a;
    }
    friend Pt operator*(double s, Pt a) {
        for (int i = 0; i < a.dim; ++i) a[i] *= s;
        return a;
    }
    double dot(const Pt& o) const {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += v[static_cast<size_t>(i)] * o[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }

    static Pt zero(int dim) {
        Pt p;
        p.dim = dim;
        return p;
    }
};

// Row-major d x d matrix, d <= 3. Used for field Jacobians and Hessians.
struct Mat {
    int dim = 0;
    std::array<double, 9> a{};

    static Mat zero(int dim) {
        Mat m;
        m.dim = dim;
        return m;
    }
    double& operator()(int i, int j) { return a[static_cast<size_t>(i * 3 + j)]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i * 3 + j)]; }

    double trace() const {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += (*this)(i, i);
        return s;
    }
    // Frobenius norm; the flow lemma measures grad B this way.
    double frobenius() const {
        double s = 0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }
    Pt apply(const Pt& x) const {
        Pt y = Pt::zero(dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) y[i] += (*this)(i, j) * x[j];
        return y;
    }
};

}  // namespace vanishcost
