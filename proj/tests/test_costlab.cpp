#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "vanishcost/costlab.hpp"
#include "vanishcost/expr.hpp"

using namespace vanishcost;
using namespace vanishcost::costlab;
using geometry::Domain;
using geometry::Grid;
using geometry::Region;
using geometry::build_grid;

namespace {

velocity::VelocityField gradient_1d(const char* f) {
    auto pot = std::make_shared<velocity::GradientPotential>(
        velocity::GradientPotential::from_expression(expr::parse(f), 1));
    return velocity::make_gradient_field(pot);
}

ProblemSpec heat_1d(int N, double T, double a = 0, double b = 1) {
    Grid g = build_grid(Domain::interval(a, b), {N, 1});
    return {g, Region::interval(a, b), velocity::builtin_field("zero", 1), T};
}

}  // namespace

TEST_CASE("single cell: adjoint constant in time, K = T^{-1/2}") {
    Grid g = build_grid(Domain::interval(0, 1), {1, 1});
    ProblemSpec prob{g, Region::interval(0, 1), gradient_1d("x1^2/2"), 4.0};
    SolverParams p;
    p.epsilon = 0.3;
    p.M = 10;
    auto est = observability_cost(prob, p);
    CHECK(est.K == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(est.converged);
    CHECK(est.flag.empty());

    CostOptions dense;
    dense.method = CostMethod::dense_eigensolve;
    CHECK(observability_cost(prob, p, dense).K == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("power iteration matches dense generalized eigensolve") {
    auto prob = heat_1d(40, 1.0);
    SolverParams p;
    p.epsilon = 0.5;
    p.M = 40;
    auto pow = observability_cost(prob, p);
    CostOptions dense;
    dense.method = CostMethod::dense_eigensolve;
    auto dns = observability_cost(prob, p, dense);
    CHECK(pow.converged);
    CHECK(std::fabs(pow.K - dns.K) / dns.K <= 1e-6);
    CHECK(dns.K > 0);
}

TEST_CASE("full observation bound K^2 <= exp(C_B T) / T") {
    Grid g = build_grid(Domain::interval(0, 1), {30, 1});
    // B = x has div B = 1
    ProblemSpec prob{g, Region::interval(0, 1), gradient_1d("x1^2/2"), 2.0};
    SolverParams p;
    p.epsilon = 0.4;
    p.M = 60;
    auto est = observability_cost(prob, p);
    CHECK(est.K * est.K <= std::exp(1.0 * prob.T) / prob.T * (1 + 1e-8));
}

TEST_CASE("quadratic form of the B application equals the omega-norm") {
    auto prob = heat_1d(25, 0.8);
    prob.omega = Region::interval(0.1, 0.6);
    SolverParams p;
    p.epsilon = 0.3;
    p.M = 20;
    int n = prob.grid.cell_count();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    pde::Slice v(n);
    for (auto& x : v) x = U(rng);
    auto phi = pde::solve_adjoint(prob.grid, v, prob.field, p, prob.T);
    auto Bv = pde::solve_forward(prob.grid, pde::Slice(n, 0.0), prob.field, p, prob.T, &prob.omega,
                                 &phi)
                  .back();
    double quad = 0;
    for (int i = 0; i < n; ++i) quad += Bv[i] * v[i];
    quad *= prob.grid.cell_volume();
    double onorm = pde::omega_norm(phi, prob.omega);
    CHECK(quad == doctest::Approx(onorm * onorm).epsilon(1e-11));
}

TEST_CASE("hum: zero initial datum needs no work") {
    auto prob = heat_1d(12, 1.0);
    SolverParams p;
    p.epsilon = 1.0;
    p.M = 10;
    auto res = hum_control(pde::Slice(12, 0.0), prob, p);
    CHECK(res.iterations == 0);
    CHECK(res.converged);
    CHECK(res.control_norm == 0);
    CHECK(res.terminal_norm == 0);
}

TEST_CASE("hum: full observation steering and duality bound") {
    auto prob = heat_1d(40, 1.0);
    SolverParams p;
    p.epsilon = 1.0;
    p.M = 40;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1, 1);
    pde::Slice y0(40);
    for (auto& x : y0) x = U(rng);

    auto res = hum_control(y0, prob, p, 1e-6, 200);
    CHECK(res.converged);
    CHECK(res.terminal_norm <= 1e-6 * res.y0_norm);
    CHECK(res.iterations <= 200);

    CostOptions dense;
    dense.method = CostMethod::dense_eigensolve;
    double K = observability_cost(prob, p, dense).K;
    CHECK(res.control_norm <= (1 + 1e-6) * K * res.y0_norm);
}

TEST_CASE("hum: partial observation duality bound") {
    auto prob = heat_1d(40, 1.0, -1, 1);
    prob.omega = Region::interval(-0.5, 0.5);
    SolverParams p;
    p.epsilon = 0.5;
    p.M = 40;
    pde::Slice y0(40);
    for (int i = 0; i < 40; ++i) y0[i] = std::sin(2.1 * i) + 0.3;

    auto res = hum_control(y0, prob, p, 1e-5, 400);
    CostOptions dense;
    dense.method = CostMethod::dense_eigensolve;
    double K = observability_cost(prob, p, dense).K;
    CHECK(res.control_norm <= (1 + 1e-6) * K * res.y0_norm);
}

TEST_CASE("window ratio: t = 0 reduces to the cost, constant case exact") {
    Grid g = build_grid(Domain::interval(0, 1), {1, 1});
    ProblemSpec prob{g, Region::interval(0, 1), velocity::builtin_field("zero", 1), 4.0};
    SolverParams p;
    p.epsilon = 0.2;
    p.M = 16;
    double r0 = observability_window_ratio(prob, p, 0.0);
    CHECK(r0 == doctest::Approx(observability_cost(prob, p).K).epsilon(1e-12));
    // single-cell adjoint is constant, so any window instant gives T^{-1/2}
    CHECK(observability_window_ratio(prob, p, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("window ratio non-decreasing in t for pure diffusion") {
    auto prob = heat_1d(24, 1.0);
    prob.omega = Region::interval(0.2, 0.8);
    SolverParams p;
    p.epsilon = 0.3;
    p.M = 40;
    double r0 = observability_window_ratio(prob, p, 0.0);
    double r1 = observability_window_ratio(prob, p, 0.25);
    double r2 = observability_window_ratio(prob, p, 0.5);
    CHECK(r0 <= r1 * (1 + 1e-6));
    CHECK(r1 <= r2 * (1 + 1e-6));
}

TEST_CASE("window ratio rejects time-dependent fields and bad t") {
    auto prob = heat_1d(8, 1.0);
    SolverParams p;
    p.epsilon = 0.5;
    p.M = 10;
    CHECK_THROWS_AS(observability_window_ratio(prob, p, 1.0), Error);
    prob.field.time_dependent = true;
    CHECK_THROWS_AS(observability_window_ratio(prob, p, 0.5), Error);
}

TEST_CASE("sweep: singleton lists reproduce a direct call, rows sorted") {
    SweepSpec spec;
    spec.domain = Domain::interval(0, 1);
    spec.omega = Region::interval(0.2, 0.8);
    spec.field = velocity::builtin_field("zero", 1);
    spec.grid_constant = 8.0;
    spec.min_steps = 20;
    spec.steps_per_unit_time = 20;
    spec.base.residual_tol = 1e-9;

    auto one = sweep(spec, {0.25}, {1.0});
    REQUIRE(one.size() == 1);
    CHECK(one[0].N == 16);
    CHECK(one[0].M == 20);
    CHECK(one[0].flag.empty());
    ProblemSpec prob{build_grid(spec.domain, {one[0].N, 1}), spec.omega, spec.field, 1.0};
    SolverParams p = spec.base;
    p.epsilon = 0.25;
    p.M = one[0].M;
    CHECK(one[0].K == doctest::Approx(observability_cost(prob, p, spec.cost).K).epsilon(1e-14));

    auto rows = sweep(spec, {0.1, 0.4, 0.2}, {1.0});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].epsilon == 0.4);
    CHECK(rows[1].epsilon == 0.2);
    CHECK(rows[2].epsilon == 0.1);

    CHECK_THROWS_AS(sweep(spec, {}, {1.0}), Error);
    CHECK_THROWS_AS(sweep(spec, {-0.1}, {1.0}), Error);
}

TEST_CASE("sweep csv has the pinned header") {
    std::vector<SweepRow> rows(1);
    rows[0].epsilon = 0.5;
    rows[0].T = 1;
    rows[0].N = 4;
    rows[0].M = 8;
    rows[0].K = 1.25;
    const char* path = "sweep_test.csv";
    write_sweep_csv(rows, path);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "epsilon,T,N,M,K,method,iterations,residual,flag");
    std::string line;
    std::getline(is, line);
    CHECK(line.substr(0, 4) == "0.5,");
    is.close();
    std::remove(path);
}

TEST_CASE("fit: exact exponential line recovered") {
    std::vector<SweepRow> rows;
    for (double e : {0.5, 0.25, 0.125, 0.1, 0.05}) {
        SweepRow r;
        r.epsilon = e;
        r.T = 1.0;
        r.K = std::exp(0.3 / e);
        rows.push_back(r);
    }
    auto fit = fit_exponential(rows);
    CHECK(fit.slope == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.r2_defined);
    CHECK(fit.rows_used == 5);
    CHECK(fit.eps_min == 0.05);
    CHECK(fit.eps_max == 0.5);

    auto rep = boundedness_report(rows);
    CHECK(rep.verdict == "blow-up-trend");
}

TEST_CASE("fit: constant K gives zero slope, undefined R^2, bounded verdict") {
    std::vector<SweepRow> rows;
    for (double e : {0.5, 0.25, 0.125, 0.0625}) {
        SweepRow r;
        r.epsilon = e;
        r.T = 2.0;
        r.K = 1.7;
        rows.push_back(r);
    }
    auto rep = boundedness_report(rows);
    CHECK(std::fabs(rep.slope) <= 1e-13);
    CHECK_FALSE(rep.r2_defined);
    CHECK(rep.verdict == "bounded-trend");
    CHECK(rep.spread == doctest::Approx(1.0));
}

TEST_CASE("fit: degenerate inputs rejected") {
    std::vector<SweepRow> rows;
    for (int i = 0; i < 4; ++i) {
        SweepRow r;
        r.epsilon = 0.25;
        r.T = 1.0;
        r.K = 2.0;
        rows.push_back(r);
    }
    CHECK_THROWS_AS(fit_exponential(rows), Error);  // all epsilon equal
    rows.pop_back();
    CHECK_THROWS_AS(fit_exponential(rows), Error);  // fewer than 4 rows
}

TEST_CASE("fit ignores flagged and nonpositive rows") {
    std::vector<SweepRow> rows;
    for (double e : {0.5, 0.25, 0.125, 0.1, 0.05}) {
        SweepRow r;
        r.epsilon = e;
        r.T = 1.0;
        r.K = std::exp(0.2 / e);
        rows.push_back(r);
    }
    SweepRow bad;
    bad.epsilon = 0.4;
    bad.T = 1.0;
    bad.K = 1e9;
    bad.flag = "inconclusive";
    rows.push_back(bad);
    auto fit = fit_exponential(rows);
    CHECK(fit.rows_used == 5);
    CHECK(fit.slope == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("mean lower bound: constants saturate, zero mass is vacuous") {
    auto prob = heat_1d(20, 1.5);
    SolverParams p;
    p.epsilon = 0.4;
    p.M = 30;

    auto rep = mean_lower_bound_check(pde::Slice(20, 2.0), prob, p);
    CHECK_FALSE(rep.vacuous);
    CHECK(rep.holds);
    CHECK(std::fabs(rep.margin) <= 1e-10);

    pde::Slice odd(20);
    for (int i = 0; i < 20; ++i) odd[i] = prob.grid.cell_center(i)[0] - 0.5;
    CHECK(mean_lower_bound_check(odd, prob, p).vacuous);

    pde::Slice bump(20, 0.0);
    for (int i = 7; i < 13; ++i) bump[i] = 1.0;
    auto rb = mean_lower_bound_check(bump, prob, p);
    CHECK(rb.holds);
    CHECK(rb.margin > 0);
}

TEST_CASE("enlarging omega never increases K") {
    auto prob = heat_1d(30, 1.0);
    SolverParams p;
    p.epsilon = 0.3;
    p.M = 30;
    double prev = std::numeric_limits<double>::infinity();
    for (auto [a, b] : {std::pair{0.4, 0.6}, {0.25, 0.75}, {0.0, 1.0}}) {
        prob.omega = Region::interval(a, b);
        double K = observability_cost(prob, p).K;
        CHECK(K <= prev * (1 + 1e-8));
        prev = K;
    }
}

TEST_CASE("regularization shift barely moves the estimate") {
    auto prob = heat_1d(20, 1.0);
    prob.omega = Region::interval(0.1, 0.9);
    SolverParams p;
    p.epsilon = 0.4;
    p.M = 25;
    CostOptions a, b;
    a.delta = 1e-12;
    b.delta = 1e-11;
    double Ka = observability_cost(prob, p, a).K;
    double Kb = observability_cost(prob, p, b).K;
    CHECK(std::fabs(Ka - Kb) / Ka < 1e-4);
}

TEST_CASE("omega disjoint from the grid is rejected") {
    auto prob = heat_1d(10, 1.0);
    prob.omega = Region::interval(5.0, 6.0);
    SolverParams p;
    p.epsilon = 0.5;
    p.M = 10;
    CHECK_THROWS_AS(observability_cost(prob, p), Error);
}
