#include "vanishcost/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vanishcost::flow {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Pt Trajectory::at(double t) const {
    const bool forward = times.back() >= times.front();
    // Clamp to span; queries just outside are integration round-off.
    auto cmp = [forward](double a, double b) { return forward ? a < b : a > b; };
    if (!cmp(times.front(), t)) return points.front();
    if (!cmp(t, times.back())) return points.back();
    size_t lo = 0, hi = times.size() - 1;
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        if (cmp(times[mid], t) || times[mid] == t)
            lo = mid;
        else
            hi = mid;
    }
    double h = times[hi] - times[lo];
    double s = (t - times[lo]) / h;
    // Cubic Hermite between accepted steps.
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    Pt out = Pt::zero(points[lo].dim);
    for (int i = 0; i < out.dim; ++i)
        out[i] = h00 * points[lo][i] + h10 * h * derivs[lo][i] + h01 * points[hi][i] + h11 * h * derivs[hi][i];
    return out;
}

Trajectory integrate_flow(const VelocityField& field, const Pt& x0, double t0, double t1, double tolerance,
                          double max_step) {
    Trajectory traj;
    traj.anchor = x0;
    traj.t0 = t0;
    traj.t1 = t1;
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    const double span = std::fabs(t1 - t0);
    double t = t0;
    Pt x = x0;
    require(field.in_box(x0), ErrorCode::numerical_failure, "integrate_flow: anchor outside field bounding box");
    Pt k1 = field.eval(x, t);
    traj.times.push_back(t);
    traj.points.push_back(x);
    traj.derivs.push_back(k1);
    if (span == 0.0) return traj;

    double h = std::min(max_step, std::max(span / 100.0, 1e-8));
    const double hmin = span * 1e-14;
    while (dir * (t1 - t) > 0) {
        h = std::min(h, std::fabs(t1 - t));
        double hs = dir * h;
        Pt k2 = field.eval(x + (hs * a21) * k1, t + hs * c2);
        Pt k3 = field.eval(x + (hs * a31) * k1 + (hs * a32) * k2, t + hs * c3);
        Pt k4 = field.eval(x + (hs * a41) * k1 + (hs * a42) * k2 + (hs * a43) * k3, t + hs * c4);
        Pt k5 = field.eval(x + (hs * a51) * k1 + (hs * a52) * k2 + (hs * a53) * k3 + (hs * a54) * k4,
                           t + hs * c5);
        Pt k6 = field.eval(
            x + (hs * a61) * k1 + (hs * a62) * k2 + (hs * a63) * k3 + (hs * a64) * k4 + (hs * a65) * k5,
            t + hs);
        Pt xn = x + (hs * b1) * k1 + (hs * b3) * k3 + (hs * b4) * k4 + (hs * b5) * k5 + (hs * b6) * k6;
        Pt k7 = field.eval(xn, t + hs);
        Pt errv = (hs * e1) * k1 + (hs * e3) * k3 + (hs * e4) * k4 + (hs * e5) * k5 + (hs * e6) * k6 +
                  (hs * e7) * k7;
        double sc = std::max(1.0, std::max(x.norm(), xn.norm()));
        double err = errv.norm() / (tolerance * sc);
        if (err <= 1.0 || h <= hmin) {
            t += hs;
            x = xn;
            k1 = k7;  // FSAL
            traj.times.push_back(t);
            traj.points.push_back(x);
            traj.derivs.push_back(k1);
            ++traj.steps;
            traj.max_local_error = std::max(traj.max_local_error, errv.norm());
            require(field.in_box(x), ErrorCode::numerical_failure,
                    "integrate_flow: trajectory left the field bounding box at t=" + std::to_string(t));
        }
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h *= std::clamp(fac, 0.2, 5.0);
        h = std::min(h, max_step);
        h = std::max(h, hmin);
        require(traj.steps < 2000000, ErrorCode::numerical_failure, "integrate_flow: step limit exceeded");
    }
    return traj;
}

Pt flow_map(const VelocityField& field, double t1, double t0, const Pt& x0, double tolerance) {
    if (t1 == t0) return x0;
    return integrate_flow(field, x0, t0, t1, tolerance).end();
}

GronwallReport check_gronwall(
    const VelocityField& field,
    const std::vector<std::pair<std::pair<Pt, double>, std::pair<Pt, double>>>& pairs, double T, double sup_B,
    double sup_grad_B, int time_samples) {
    GronwallReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pairs) {
        auto ta = integrate_flow(field, a.first, a.second, T, 1e-10);
        auto tb = integrate_flow(field, b.first, b.second, T, 1e-10);
        // Also cover [0, anchor time] backward so every t in [0,T] is sampled.
        auto ta_back = integrate_flow(field, a.first, a.second, 0.0, 1e-10);
        auto tb_back = integrate_flow(field, b.first, b.second, 0.0, 1e-10);
        double bound_base = sup_B * std::fabs(a.second - b.second) + (a.first - b.first).norm();
        double bound = std::exp(sup_grad_B * T) * bound_base;
        for (int k = 0; k <= time_samples; ++k) {
            double t = T * k / time_samples;
            Pt pa = t >= a.second ? ta.at(t) : ta_back.at(t);
            Pt pb = t >= b.second ? tb.at(t) : tb_back.at(t);
            rep.worst_margin = std::min(rep.worst_margin, bound - (pa - pb).norm());
        }
        ++rep.pairs;
    }
    if (pairs.empty()) rep.worst_margin = 0.0;
    return rep;
}

std::vector<std::pair<double, double>> inside_intervals(const Trajectory& traj, const geometry::Region& region,
                                                        double a, double b, int scan_points) {
    std::vector<std::pair<double, double>> out;
    if (b <= a) return out;
    auto inside = [&](double t) { return region.contains_open(traj.at(t)); };
    double dt = (b - a) / scan_points;
    auto refine = [&](double lo, double hi, bool want_inside_at_hi) {
        // bisection on the membership predicate, to 1e-9 absolute
        for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
            double mid = 0.5 * (lo + hi);
            if (inside(mid) == want_inside_at_hi)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    };
    bool prev = inside(a);
    double open_t = prev ? a : 0.0;
    double tprev = a;
    for (int k = 1; k <= scan_points; ++k) {
        double t = (k == scan_points) ? b : a + k * dt;
        bool cur = inside(t);
        if (cur && !prev) open_t = refine(tprev, t, true);
        if (!cur && prev) out.emplace_back(open_t, refine(tprev, t, false));
        prev = cur;
        tprev = t;
    }
    if (prev) out.emplace_back(open_t, b);
    return out;
}

std::optional<double> entry_time(const Trajectory& traj, const geometry::Region& region, double a, double b,
                                 int scan_points) {
    auto iv = inside_intervals(traj, region, a, b, scan_points);
    if (iv.empty()) return std::nullopt;
    // First inside time along the direction of integration: for a backward
    // trajectory that is the upper end of the latest interval.
    bool backward = traj.t1 < traj.t0;
    return backward ? iv.back().second : iv.front().first;
}

namespace {

std::vector<Pt> ball_samples(const Pt& center, double r, int shell_points) {
    std::vector<Pt> out{center};
    if (r <= 0) return out;
    const int dim = center.dim;
    if (dim == 1) {
        out.push_back(Pt(center[0] - r));
        out.push_back(Pt(center[0] + r));
        return out;
    }
    if (dim == 2) {
        int m = shell_points > 0 ? shell_points : 16;
        for (int k = 0; k < m; ++k) {
            double ang = 2.0 * M_PI * k / m;
            out.push_back(center + r * Pt(std::cos(ang), std::sin(ang)));
        }
        return out;
    }
    // 3-D: Fibonacci sphere shell
    int m = shell_points > 0 ? shell_points : 64;
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < m; ++k) {
        double z = 1.0 - 2.0 * (k + 0.5) / m;
        double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        out.push_back(center + r * Pt(rho * std::cos(ga * k), rho * std::sin(ga * k), z));
    }
    return out;
}

std::vector<Pt> closure_lattice(const geometry::Domain& domain, int per_axis) {
    std::array<double, 3> lo, hi;
    domain.bounding_box(lo, hi);
    std::vector<Pt> pts;
    if (domain.dim == 1) {
        for (int i = 0; i < per_axis; ++i) pts.push_back(Pt(lo[0] + (hi[0] - lo[0]) * i / (per_axis - 1.0)));
        return pts;
    }
    for (int i = 0; i < per_axis; ++i)
        for (int j = 0; j < per_axis; ++j) {
            Pt p(lo[0] + (hi[0] - lo[0]) * i / (per_axis - 1.0), lo[1] + (hi[1] - lo[1]) * j / (per_axis - 1.0));
            if (domain.contains(p)) pts.push_back(p);
        }
    return pts;
}

using Intervals = std::vector<std::pair<double, double>>;

Intervals intersect(const Intervals& a, const Intervals& b) {
    Intervals out;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double lo = std::max(a[i].first, b[j].first);
        double hi = std::min(a[i].second, b[j].second);
        // Ties at endpoints resolve to "no entry" (conservative): strict overlap only.
        if (hi > lo) out.emplace_back(lo, hi);
        if (a[i].second < b[j].second)
            ++i;
        else
            ++j;
    }
    return out;
}

double total_measure(const Intervals& iv) {
    double s = 0;
    for (auto& [a, b] : iv) s += b - a;
    return s;
}

}  // namespace

FlushingReport check_flushing(const VelocityField& field, const geometry::Domain& omega_domain,
                              const geometry::Region& target, double T, double T0, double r0,
                              const LatticeSpec& lattice) {
    require(0 < T0 && T0 < T, ErrorCode::config_error, "check_flushing: need 0 < T0 < T");
    require(r0 > 0, ErrorCode::config_error, "check_flushing: need r0 > 0");
    FlushingReport rep;
    rep.T = T;
    rep.T0 = T0;
    rep.r0 = r0;
    rep.min_common_window = std::numeric_limits<double>::infinity();

    auto anchors = closure_lattice(omega_domain, lattice.space_per_axis);
    std::array<double, 3> blo, bhi;
    omega_domain.bounding_box(blo, bhi);
    double spacing = 0;
    for (int a = 0; a < omega_domain.dim; ++a)
        spacing = std::max(spacing, (bhi[static_cast<size_t>(a)] - blo[static_cast<size_t>(a)]) /
                                        (lattice.space_per_axis - 1.0));
    {
        std::ostringstream os;
        os << lattice.space_per_axis << " per axis (spacing " << spacing << "), " << lattice.time_points
           << " anchor times in [" << T0 << "," << T << "]";
        rep.lattice_description = os.str();
    }
    bool coarse = spacing > r0;

    for (int kt = 0; kt < lattice.time_points; ++kt) {
        double t0 =
            lattice.time_points == 1 ? T0 : T0 + (T - T0) * kt / (lattice.time_points - 1.0);
        for (const auto& x0 : anchors) {
            Intervals common;
            bool first = true;
            bool dead = false;
            for (const auto& s : ball_samples(x0, r0, lattice.shell_points)) {
                Intervals iv;
                try {
                    auto traj = integrate_flow(field, s, t0, t0 - T0, lattice.ode_tolerance);
                    iv = inside_intervals(traj, target, t0 - T0, t0, lattice.scan_points);
                } catch (const Error& e) {
                    // Leaving the field's bounding box counts as never
                    // visiting the target within the window.
                    if (e.code() != ErrorCode::numerical_failure) throw;
                }
                common = first ? iv : intersect(common, iv);
                first = false;
                if (common.empty()) {
                    dead = true;
                    break;
                }
            }
            rep.lattice_points++;
            if (dead) {
                rep.violations.push_back({x0, t0, 0.0, 0.0});
            } else {
                double w = total_measure(common);
                rep.min_common_window = std::min(rep.min_common_window, w);
                double tstar = 0.5 * (common.back().first + common.back().second);
                rep.certificates.push_back({x0, t0, w, tstar});
            }
        }
    }
    if (!rep.violations.empty())
        rep.verdict = FlushingVerdict::violated;
    else if (coarse) {
        rep.verdict = FlushingVerdict::inconclusive;
        rep.warning = "lattice spacing exceeds r0; a satisfied verdict would not be trustworthy";
    } else
        rep.verdict = FlushingVerdict::satisfied;
    return rep;
}

AutonomousParams autonomous_flushing_params(const VelocityField& field, const geometry::Domain& omega_domain,
                                            const geometry::Region& target, double horizon_cap,
                                            const LatticeSpec& lattice) {
    require(!field.time_dependent, ErrorCode::config_error,
            "autonomous_flushing_params: field must be time-independent");
    AutonomousParams out;
    auto anchors = closure_lattice(omega_domain, lattice.space_per_axis);
    std::vector<double> entry_times;
    entry_times.reserve(anchors.size());
    std::vector<double> probe_times;  // strictly inside the latest interval
    for (const auto& x0 : anchors) {
        Intervals iv;
        try {
            auto traj = integrate_flow(field, x0, 0.0, -horizon_cap, lattice.ode_tolerance);
            iv = inside_intervals(traj, target, -horizon_cap, 0.0, lattice.scan_points);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::numerical_failure) throw;
        }
        if (iv.empty()) {
            out.satisfied = false;
            out.refuting_point = x0;
            return out;
        }
        entry_times.push_back(iv.back().second);
        probe_times.push_back(0.5 * (iv.back().first + iv.back().second));
    }
    out.satisfied = true;
    double max_tau = 0;
    for (double t : entry_times) max_tau = std::max(max_tau, -t);
    out.max_entry_time = max_tau;
    out.T0 = std::max(1.1 * max_tau, 1e-3 * horizon_cap);
    // Largest lattice-verified continuity radius: the ball shell must still
    // be inside the target at the per-point entry time.
    double r = 0.5 * target.inradius();
    Pt fail_anchor = Pt::zero(field.dim);
    for (; r > 1e-6; r *= 0.5) {
        bool ok = true;
        for (size_t i = 0; i < anchors.size() && ok; ++i) {
            double tstar = probe_times[i];
            fail_anchor = anchors[i];
            for (const auto& s : ball_samples(anchors[i], r, lattice.shell_points)) {
                try {
                    Pt y = flow_map(field, tstar, 0.0, s, lattice.ode_tolerance);
                    if (!target.contains_open(y)) ok = false;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::numerical_failure) throw;
                    ok = false;
                }
                if (!ok) break;
            }
        }
        if (ok) break;
    }
    out.r0 = r > 1e-6 ? r : 0.0;
    if (out.r0 == 0.0) {
        // even vanishing balls fail somewhere (an anchor sits on an invariant
        // set whose every neighborhood escapes): refute with that anchor
        out.satisfied = false;
        out.refuting_point = fail_anchor;
    }
    return out;
}

bool tube_membership(const TubeQuery& query, const VelocityField& field, const Pt& x, double t,
                     double tolerance) {
    require(t >= query.t1 && t <= query.t2, ErrorCode::config_error, "tube_membership: t outside [t1,t2]");
    Pt y = flow_map(field, query.t2, t, x, tolerance);
    return (y - query.x0).norm() <= query.r + 10 * tolerance;
}

}  // namespace vanishcost::flow
