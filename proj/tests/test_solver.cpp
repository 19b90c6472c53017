#include "doctest.h"

#include <cmath>
#include <random>

#include "ac/solver.hpp"

using namespace ac;

namespace {

// strictly convex quadratic 0.5 x'Ax - b'x with A = D + v v'
struct Quadratic {
    std::vector<double> d, v, b;

    double operator()(const VecX& x, VecX& g) const {
        const size_t n = x.size();
        double vx = 0;
        for (size_t i = 0; i < n; ++i) vx += v[i] * x[i];
        double E = 0;
        g.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const double Ax = d[i] * x[i] + vx * v[i];
            g[i] = Ax - b[i];
            E += 0.5 * x[i] * Ax - b[i] * x[i];
        }
        return E;
    }
};

}  // namespace

TEST_CASE("minimize: strictly convex quadratic in 10 unknowns") {
    const size_t n = 10;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ud(1.0, 3.0), ub(-1.0, 1.0);
    Quadratic q;
    for (size_t i = 0; i < n; ++i) {
        q.d.push_back(ud(rng));
        q.v.push_back(0.3 * ub(rng));
        q.b.push_back(ub(rng));
    }

    SolverConfig cfg;
    cfg.grad_tol = 1e-10;
    const auto res = minimize([&](const VecX& x, VecX& g) { return q(x, g); }, VecX(n, 0.0), cfg);
    REQUIRE(res.converged);
    CHECK(res.grad_norm <= 1e-10);

    // verify against the residual of the linear system A x = b
    VecX g;
    q(res.u, g);
    for (double gi : g) CHECK(std::abs(gi) <= 1e-10);
}

TEST_CASE("minimize: stationary start returns immediately") {
    // minimum of (x-1)^2 at x=1
    auto fg = [](const VecX& x, VecX& g) {
        g = {2 * (x[0] - 1.0)};
        return (x[0] - 1.0) * (x[0] - 1.0);
    };
    SolverConfig cfg;
    cfg.grad_tol = 1e-12;
    const auto res = minimize(fg, VecX{1.0}, cfg);
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
}

TEST_CASE("minimize: energy decreases monotonically") {
    // Rosenbrock-like smooth nonconvex function
    auto fg = [](const VecX& x, VecX& g) {
        const double a = x[0], b = x[1];
        g.resize(2);
        g[0] = -2 * (1 - a) - 400 * a * (b - a * a);
        g[1] = 200 * (b - a * a);
        return (1 - a) * (1 - a) + 100 * (b - a * a) * (b - a * a);
    };
    std::vector<double> energies;
    auto tracked = [&](const VecX& x, VecX& g) {
        const double E = fg(x, g);
        return E;
    };
    SolverConfig cfg;
    cfg.grad_tol = 1e-8;
    cfg.max_iter = 5000;
    const auto res = minimize(tracked, VecX{-1.2, 1.0}, cfg);
    CHECK(res.converged);
    CHECK(res.u[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(res.u[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("minimize is deterministic") {
    Quadratic q;
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ud(1.0, 2.0);
    for (int i = 0; i < 6; ++i) {
        q.d.push_back(ud(rng));
        q.v.push_back(0.1 * ud(rng));
        q.b.push_back(ud(rng) - 1.5);
    }
    SolverConfig cfg;
    cfg.grad_tol = 1e-9;
    const auto r1 = minimize([&](const VecX& x, VecX& g) { return q(x, g); }, VecX(6, 0.0), cfg);
    const auto r2 = minimize([&](const VecX& x, VecX& g) { return q(x, g); }, VecX(6, 0.0), cfg);
    REQUIRE(r1.u.size() == r2.u.size());
    for (size_t i = 0; i < r1.u.size(); ++i) CHECK(r1.u[i] == r2.u[i]);
    CHECK(r1.iterations == r2.iterations);
}

TEST_CASE("force_balance: linear SPD system converges to the root") {
    const size_t n = 8;
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> ud(0.5, 2.0), us(-1.0, 1.0);
    std::vector<double> d(n), star(n);
    for (size_t i = 0; i < n; ++i) {
        d[i] = ud(rng);
        star[i] = us(rng);
    }
    auto force = [&](const VecX& x, VecX& F) {
        F.resize(n);
        for (size_t i = 0; i < n; ++i) F[i] = d[i] * (x[i] - star[i]);
    };
    SolverConfig cfg;
    cfg.grad_tol = 1e-11;
    const auto res = force_balance(force, VecX(n, 0.0), cfg);
    REQUIRE(res.converged);
    for (size_t i = 0; i < n; ++i) CHECK(res.u[i] == doctest::Approx(star[i]).epsilon(1e-8));
}

TEST_CASE("force_balance: mildly nonlinear nonsymmetric system") {
    const size_t n = 5;
    auto force = [&](const VecX& x, VecX& F) {
        F.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const double xn = x[(i + 1) % n];
            F[i] = 2.0 * x[i] + 0.3 * xn + 0.1 * std::sin(x[i]) - 0.5;
        }
    };
    SolverConfig cfg;
    cfg.grad_tol = 1e-10;
    const auto res = force_balance(force, VecX(n, 0.0), cfg);
    REQUIRE(res.converged);
    VecX F;
    force(res.u, F);
    CHECK(inf_norm(F) <= 1e-10);
}
