#include "vanishcost/pde.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace vanishcost::pde {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

struct Face {
    int c1, c2;   // low cell, high cell (c2 = -1 for a masked/ghost side)
    int axis;
    Pt center;
    double area;
};

// The common backward stepper: reversed time tau = t2 - t, cell equation
//   d phi/d tau = (1/vol) sum_faces area * (eps grad phi + phi B) . n
// with zero total flux through the outer boundary, Dirichlet ghost
// reflection at masked interfaces, and donor-cell upwinding of the face
// value (transport velocity of the reversed equation is -B).
struct Stepper {
    const Grid& grid;
    const VelocityField& field;
    SolverParams params;
    double t1, t2, dtau;
    std::vector<char> masked;
    std::vector<Face> inner_faces;       // both cells active
    std::vector<Face> interface_faces;   // c1 active, c2 masked
    SpMat dop;      // diffusion operator (rows of masked cells are zero)
    SpMat rhs_mat;  // I + dtau (1-theta) dop
    double courant = 0;

    Stepper(const Grid& g, const VelocityField& f, const SolverParams& p, double a, double b,
            const Region* inner)
        : grid(g), field(f), params(p), t1(a), t2(b) {
        params.validate();
        require(b > a, ErrorCode::config_error, "solver: need t2 > t1");
        require(f.dim == g.dim, ErrorCode::config_error, "solver: field/grid dimension mismatch");
        dtau = (b - a) / params.M;
        int N = grid.cell_count();
        masked.assign(N, 0);
        if (inner)
            for (int i = 0; i < N; ++i)
                if (inner->contains_closure(grid.cell_center(i))) masked[i] = 1;
        collect_faces();
        if (inner && !inner->parts.empty()) check_annulus();
        assemble_diffusion();
    }

    void collect_faces() {
        auto add = [&](int c1, int c2, int axis) {
            if (masked[c1] && masked[c2]) return;
            if (masked[c1]) std::swap(c1, c2);
            Face fc;
            fc.c1 = c1;
            fc.axis = axis;
            Pt a = grid.cell_center(c1), b = grid.cell_center(masked[c2] ? c1 : c2);
            if (masked[c2]) {
                fc.c2 = -1;
                // face midpoint between the active cell and its masked neighbor
                Pt m = grid.cell_center(c2);
                for (int d = 0; d < grid.dim; ++d) b[d] = 0.5 * (a[d] + m[d]);
                fc.center = b;
            } else {
                fc.c2 = c2;
                Pt mid = a;
                for (int d = 0; d < grid.dim; ++d) mid[d] = 0.5 * (a[d] + b[d]);
                fc.center = mid;
            }
            fc.area = grid.dim == 1 ? 1.0 : grid.h[fc.axis == 0 ? 1 : 0];
            // orient c1 -> other side along +axis or -axis: keep a signed area
            (fc.c2 == -1 ? interface_faces : inner_faces).push_back(fc);
        };
        if (grid.dim == 1) {
            for (int i = 0; i + 1 < grid.n[0]; ++i) add(i, i + 1, 0);
        } else {
            for (int j = 0; j < grid.n[1]; ++j)
                for (int i = 0; i < grid.n[0]; ++i) {
                    if (i + 1 < grid.n[0]) add(grid.index(i, j), grid.index(i + 1, j), 0);
                    if (j + 1 < grid.n[1]) add(grid.index(i, j), grid.index(i, j + 1), 1);
                }
        }
    }


    void check_annulus() {
        // no masked cell may own a boundary face of the grid
        for (const auto& bf : grid.boundary_faces())
            require(!masked[bf.cell], ErrorCode::config_error,
                    "solve_annulus: inner region touches the outer boundary");
        bool any_active = false;
        for (char m : masked) any_active |= !m;
        require(any_active, ErrorCode::config_error, "solve_annulus: inner region covers the grid");
    }

    void assemble_diffusion() {
        int N = grid.cell_count();
        double vol = grid.cell_volume();
        std::vector<Trip> tr;
        for (const auto& fc : inner_faces) {
            double w = params.epsilon * fc.area / (grid.h[fc.axis] * vol);
            tr.emplace_back(fc.c1, fc.c1, -w);
            tr.emplace_back(fc.c1, fc.c2, w);
            tr.emplace_back(fc.c2, fc.c2, -w);
            tr.emplace_back(fc.c2, fc.c1, w);
        }
        for (const auto& fc : interface_faces) {
            // ghost reflection phi_ghost = -phi gives flux -2 eps phi / h
            double w = 2.0 * params.epsilon * fc.area / (grid.h[fc.axis] * vol);
            tr.emplace_back(fc.c1, fc.c1, -w);
        }
        dop.resize(N, N);
        dop.setFromTriplets(tr.begin(), tr.end());
        SpMat id(N, N);
        id.setIdentity();
        rhs_mat = id + (dtau * (1 - params.theta)) * dop;
    }

    // conservative upwind transport operator at time t
    SpMat vop(double t) {
        int N = grid.cell_count();
        double vol = grid.cell_volume();
        std::vector<Trip> tr;
        auto face_B = [&](const Face& fc) { return field.eval(fc.center, t)[fc.axis]; };
        for (const auto& fc : inner_faces) {
            double Bf = face_B(fc);
            courant = std::max(courant, std::fabs(Bf) * dtau / grid.h[fc.axis]);
            int donor = Bf < 0 ? fc.c1 : fc.c2;  // upwind for velocity -B
            double w = fc.area * Bf / vol;
            // outward normal of c1 is +axis, of c2 is -axis
            tr.emplace_back(fc.c1, donor, w);
            tr.emplace_back(fc.c2, donor, -w);
        }
        for (const auto& fc : interface_faces) {
            double Bf = face_B(fc);
            courant = std::max(courant, std::fabs(Bf) * dtau / grid.h[fc.axis]);
            // Dirichlet face: the masked side carries zero, so only the
            // outflow case (donor = active cell) contributes
            // outward normal sign of c1 through this face
            double sgn = fc.center[fc.axis] > grid.cell_center(fc.c1)[fc.axis] ? 1.0 : -1.0;
            double vn = -Bf * sgn;  // transport velocity -B through outward normal
            if (vn > 0) {
                // reversed-transport outflow from the active cell
                tr.emplace_back(fc.c1, fc.c1, sgn * fc.area * Bf / vol);
            }
        }
        SpMat v(N, N);
        v.setFromTriplets(tr.begin(), tr.end());
        return v;
    }

    SpMat lhs(double t) {
        int N = grid.cell_count();
        SpMat id(N, N);
        id.setIdentity();
        SpMat m = id - (dtau * params.theta) * dop - dtau * vop(t);
        return m;
    }
};

void solve_checked(Eigen::SparseLU<SpMat>& lu, const SpMat& A, const Eigen::VectorXd& b,
                   Eigen::VectorXd& x, double tol, int step) {
    x = lu.solve(b);
    double r = (A * x - b).norm() / std::max(b.norm(), 1.0);
    require(std::isfinite(r) && r <= tol, ErrorCode::numerical_failure,
            "linear solve residual " + std::to_string(r) + " at step " + std::to_string(step));
}

}  // namespace

void SolverParams::validate() const {
    require(epsilon > 0, ErrorCode::config_error, "solver: epsilon must be positive");
    require(M >= 2, ErrorCode::config_error, "solver: need at least 2 time steps");
    require(theta >= 0 && theta <= 1, ErrorCode::config_error, "solver: theta outside [0,1]");
    require(residual_tol > 0 && residual_tol <= 1e-6, ErrorCode::config_error,
            "solver: residual tolerance outside (0, 1e-6]");
}

SpaceTimeField solve_annulus(const Grid& grid, const Slice& G, const VelocityField& field,
                             const SolverParams& params, double t1, double t2, const Region& inner,
                             const AnnulusSource* source) {
    require(static_cast<int>(G.size()) == grid.cell_count(), ErrorCode::config_error,
            "solve_annulus: terminal slice size mismatch");
    Stepper st(grid, field, params, t1, t2, &inner);
    int N = grid.cell_count(), M = params.M;
    double vol = grid.cell_volume();

    SpaceTimeField out;
    out.grid = grid;
    out.tag = FieldTag::annulus_adjoint;
    out.t1 = t1;
    out.t2 = t2;
    out.epsilon = params.epsilon;
    out.times.resize(M + 1);
    for (int k = 0; k <= M; ++k) out.times[k] = t1 + (t2 - t1) * k / M;
    out.slices.assign(M + 1, Slice(N, 0.0));

    Eigen::VectorXd phi(N);
    for (int i = 0; i < N; ++i) phi[i] = st.masked[i] ? 0.0 : G[i];
    for (int i = 0; i < N; ++i) out.slices[M][i] = phi[i];

    Eigen::SparseLU<SpMat> lu;
    SpMat A;
    bool cached = false;
    for (int j = M; j >= 1; --j) {
        double tnew = out.times[j - 1];
        if (!cached || field.time_dependent) {
            A = st.lhs(tnew);
            lu.compute(A);
            require(lu.info() == Eigen::Success, ErrorCode::numerical_failure,
                    "solve_annulus: factorization failed at step " + std::to_string(M - j));
            cached = true;
        }
        Eigen::VectorXd b = st.rhs_mat * phi;
        if (source) {
            for (int i = 0; i < N; ++i) {
                if (st.masked[i]) continue;
                Pt x = grid.cell_center(i);
                double s = source->f0 ? source->f0(x, tnew) : 0.0;
                for (size_t a = 0; a < source->fvec.size() && a < static_cast<size_t>(grid.dim); ++a) {
                    Pt xp = x, xm = x;
                    xp[static_cast<int>(a)] += 0.5 * grid.h[a];
                    xm[static_cast<int>(a)] -= 0.5 * grid.h[a];
                    s += params.epsilon * (source->fvec[a](xp, tnew) - source->fvec[a](xm, tnew)) / grid.h[a];
                }
                b[i] += st.dtau * s;
            }
        }
        solve_checked(lu, A, b, phi, params.residual_tol, M - j);
        for (int i = 0; i < N; ++i) out.slices[j - 1][i] = phi[i];
    }
    out.courant = st.courant;
    if (out.courant > 2)
        out.warning = "advective Courant number " + std::to_string(out.courant) + " exceeds 2";
    (void)vol;
    return out;
}

SpaceTimeField solve_adjoint(const Grid& grid, const Slice& phi_T, const VelocityField& field,
                             const SolverParams& params, double T) {
    Region empty;
    empty.dim = grid.dim;
    SpaceTimeField out = solve_annulus(grid, phi_T, field, params, 0.0, T, empty, nullptr);
    out.tag = FieldTag::adjoint;
    return out;
}

SpaceTimeField solve_forward(const Grid& grid, const Slice& y0, const VelocityField& field,
                             const SolverParams& params, double T, const Region* omega,
                             const SpaceTimeField* control) {
    require(static_cast<int>(y0.size()) == grid.cell_count(), ErrorCode::config_error,
            "solve_forward: initial slice size mismatch");
    Stepper st(grid, field, params, 0.0, T, nullptr);
    int N = grid.cell_count(), M = params.M;

    SpaceTimeField out;
    out.grid = grid;
    out.tag = FieldTag::state;
    out.t1 = 0;
    out.t2 = T;
    out.epsilon = params.epsilon;
    out.times.resize(M + 1);
    for (int k = 0; k <= M; ++k) out.times[k] = T * k / M;
    out.slices.assign(M + 1, Slice(N, 0.0));

    std::vector<double> frac(N, 0.0);
    if (omega && control) {
        require(control->steps() == M && static_cast<int>(control->front().size()) == N,
                ErrorCode::config_error, "solve_forward: control shape mismatch");
        for (int i = 0; i < N; ++i) frac[i] = grid.cell_fraction(i, *omega);
    }
    double dt = T / M;
    auto weight = [&](int k) { return (k == 0 || k == M) ? dt / 2 : dt; };

    Eigen::VectorXd y(N);
    for (int i = 0; i < N; ++i) y[i] = y0[i];
    for (int i = 0; i < N; ++i) out.slices[0][i] = y[i];

    Eigen::SparseLU<SpMat> lu;
    SpMat At;
    bool cached = false;
    for (int k = 0; k < M; ++k) {
        if (omega && control)
            for (int i = 0; i < N; ++i) y[i] += weight(k) * frac[i] * control->slices[k][i];
        // each forward step is the transpose of the adjoint step anchored at
        // the same time level t_k
        if (!cached || field.time_dependent) {
            At = SpMat(st.lhs(out.times[k]).transpose());
            lu.compute(At);
            require(lu.info() == Eigen::Success, ErrorCode::numerical_failure,
                    "solve_forward: factorization failed at step " + std::to_string(k));
            cached = true;
        }
        Eigen::VectorXd z;
        solve_checked(lu, At, y, z, params.residual_tol, k);
        y = st.rhs_mat * z;  // rhs_mat is symmetric
        for (int i = 0; i < N; ++i) out.slices[k + 1][i] = y[i];
    }
    if (omega && control)
        for (int i = 0; i < N; ++i) out.slices[M][i] += weight(M) * frac[i] * control->slices[M][i];
    out.courant = st.courant;
    if (out.courant > 2)
        out.warning = "advective Courant number " + std::to_string(out.courant) + " exceeds 2";
    return out;
}

double mass(const Grid& grid, const Slice& s) {
    double vol = grid.cell_volume(), m = 0;
    for (double v : s) m += v;
    return m * vol;
}

double l2_norm(const Grid& grid, const Slice& s) {
    double vol = grid.cell_volume(), m = 0;
    for (double v : s) m += v * v;
    return std::sqrt(m * vol);
}

double h1_seminorm(const Grid& grid, const Slice& s) {
    double acc = 0;
    auto add = [&](int a, int b, int axis) {
        double d = (s[b] - s[a]) / grid.h[axis];
        double area = grid.dim == 1 ? 1.0 : grid.h[axis == 0 ? 1 : 0];
        acc += d * d * area * grid.h[axis];
    };
    if (grid.dim == 1) {
        for (int i = 0; i + 1 < grid.n[0]; ++i) add(i, i + 1, 0);
    } else {
        for (int j = 0; j < grid.n[1]; ++j)
            for (int i = 0; i < grid.n[0]; ++i) {
                if (i + 1 < grid.n[0]) add(grid.index(i, j), grid.index(i + 1, j), 0);
                if (j + 1 < grid.n[1]) add(grid.index(i, j), grid.index(i, j + 1), 1);
            }
    }
    return std::sqrt(acc);
}

std::vector<double> time_weights(const SpaceTimeField& f) {
    int M = f.steps();
    double dt = (f.t2 - f.t1) / M;
    std::vector<double> w(M + 1, dt);
    w.front() = w.back() = dt / 2;
    return w;
}

double omega_norm(const SpaceTimeField& f, const Region& omega) {
    const Grid& g = f.grid;
    int N = g.cell_count();
    std::vector<double> frac(N);
    for (int i = 0; i < N; ++i) frac[i] = g.cell_fraction(i, omega);
    auto w = time_weights(f);
    double vol = g.cell_volume(), acc = 0;
    for (int k = 0; k <= f.steps(); ++k) {
        double s = 0;
        for (int i = 0; i < N; ++i) s += frac[i] * f.slices[k][i] * f.slices[k][i];
        acc += w[k] * s * vol;
    }
    return std::sqrt(acc);
}

HopfCoefficients hopf_coefficients(const GradientPotential& f, double eps) {
    HopfCoefficients c;
    auto V = [&f](const Pt& x, double t) {
        Pt g = f.grad(x, t);
        return g.dot(g) / 4 + f.dt(x, t) / 2;
    };
    c.V = V;
    c.a_eps = [&f, V, eps](const Pt& x, double t) { return V(x, t) / eps - f.laplacian(x, t) / 2; };
    c.b = [&f](const Pt& x, const Pt& n, double t) { return f.normal_derivative(x, n, t) / 2; };
    return c;
}

namespace {

SpaceTimeField hopf_scale(const SpaceTimeField& phi, const GradientPotential& f, double eps, double sign) {
    SpaceTimeField out = phi;
    for (int k = 0; k <= phi.steps(); ++k) {
        double t = phi.times[k];
        for (int i = 0; i < phi.grid.cell_count(); ++i) {
            double arg = sign * f.f(phi.grid.cell_center(i), t) / (2 * eps);
            require(std::fabs(arg) <= 700, ErrorCode::numerical_failure,
                    "hopf transform: exp argument exceeds 700; increase epsilon or rescale f");
            out.slices[k][i] = std::exp(arg) * phi.slices[k][i];
        }
    }
    return out;
}

}  // namespace

SpaceTimeField hopf_transform(const SpaceTimeField& phi, const GradientPotential& f, double eps) {
    return hopf_scale(phi, f, eps, 1.0);
}

SpaceTimeField hopf_inverse(const SpaceTimeField& Phi, const GradientPotential& f, double eps) {
    return hopf_scale(Phi, f, eps, -1.0);
}

EnergyReport energy_check(const SpaceTimeField& f, const VelocityField& field, const SolverParams& params,
                          double extra_source_norm) {
    EnergyReport rep;
    auto w = time_weights(f);
    double grad2 = 0;
    for (int k = 0; k <= f.steps(); ++k) {
        rep.sup_l2 = std::max(rep.sup_l2, l2_norm(f.grid, f.slices[k]));
        double g = h1_seminorm(f.grid, f.slices[k]);
        grad2 += w[k] * g * g;
    }
    rep.grad_term = std::sqrt(params.epsilon * grad2);
    rep.lhs = rep.sup_l2 + rep.grad_term;
    rep.data_norm = l2_norm(f.grid, f.back()) + extra_source_norm;

    // sampled sup of |B| over the grid and time axis
    double supB = 0;
    for (int k = 0; k <= f.steps(); ++k)
        for (int i = 0; i < f.grid.cell_count(); ++i)
            supB = std::max(supB, field.eval(f.grid.cell_center(i), f.times[k]).norm());
    rep.envelope_rate = supB * supB / params.epsilon + params.epsilon + 1;

    if (rep.data_norm == 0) {
        rep.trivial = rep.lhs == 0;
        rep.admissible_c = rep.trivial ? 0 : std::numeric_limits<double>::infinity();
        return rep;
    }
    double target = rep.lhs / rep.data_norm;
    double span = (f.t2 - f.t1) * rep.envelope_rate;
    auto val = [&](double c) { return c * std::exp(c * span); };
    double lo = 0, hi = 1;
    while (val(hi) < target && hi < 1e12) hi *= 2;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (val(mid) < target ? lo : hi) = mid;
    }
    rep.admissible_c = hi;
    return rep;
}

namespace {

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void SpaceTimeField::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), ErrorCode::config_error, "cannot open " + path + " for writing");
    os.write("VCST", 4);
    put<int32_t>(os, 1);
    put<int32_t>(os, grid.dim);
    put<int32_t>(os, grid.n[0]);
    put<int32_t>(os, grid.n[1]);
    for (int a = 0; a < 2; ++a) put<double>(os, grid.lo[a]);
    for (int a = 0; a < 2; ++a) put<double>(os, grid.hi[a]);
    put<int32_t>(os, static_cast<int32_t>(tag));
    put<int32_t>(os, steps());
    put<double>(os, t1);
    put<double>(os, t2);
    put<double>(os, epsilon);
    for (const auto& s : slices)
        os.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * 8));
    require(os.good(), ErrorCode::numerical_failure, "write failed: " + path);
}

SpaceTimeField SpaceTimeField::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), ErrorCode::config_error, "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    require(std::memcmp(magic, "VCST", 4) == 0, ErrorCode::config_error, "bad field file: " + path);
    require(get<int32_t>(is) == 1, ErrorCode::config_error, "unsupported field file version");
    SpaceTimeField f;
    f.grid.dim = get<int32_t>(is);
    f.grid.n[0] = get<int32_t>(is);
    f.grid.n[1] = get<int32_t>(is);
    for (int a = 0; a < 2; ++a) f.grid.lo[a] = get<double>(is);
    for (int a = 0; a < 2; ++a) f.grid.hi[a] = get<double>(is);
    for (int a = 0; a < 2; ++a)
        f.grid.h[a] = f.grid.n[a] > 0 ? (f.grid.hi[a] - f.grid.lo[a]) / f.grid.n[a] : 0.0;
    f.tag = static_cast<FieldTag>(get<int32_t>(is));
    int M = get<int32_t>(is);
    f.t1 = get<double>(is);
    f.t2 = get<double>(is);
    f.epsilon = get<double>(is);
    int N = f.grid.cell_count();
    f.times.resize(M + 1);
    for (int k = 0; k <= M; ++k) f.times[k] = f.t1 + (f.t2 - f.t1) * k / M;
    f.slices.assign(M + 1, Slice(N));
    for (auto& s : f.slices) is.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(N * 8));
    require(is.good(), ErrorCode::config_error, "truncated field file: " + path);
    return f;
}

void SpaceTimeField::export_tsv(const std::string& path) const {
    std::ofstream os(path);
    require(os.good(), ErrorCode::config_error, "cannot open " + path + " for writing");
    os.precision(17);
    os << "t\tx1";
    if (grid.dim == 2) os << "\tx2";
    os << "\tvalue\n";
    for (int k = 0; k <= steps(); ++k)
        for (int i = 0; i < grid.cell_count(); ++i) {
            Pt c = grid.cell_center(i);
            os << times[k] << '\t' << c[0];
            if (grid.dim == 2) os << '\t' << c[1];
            os << '\t' << slices[k][i] << '\n';
        }
}

}  // namespace vanishcost::pde
