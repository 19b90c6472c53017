#include "doctest.h"

#include <cmath>
#include <random>

#include "ac/coupling.hpp"
#include "ac/study.hpp"

using namespace ac;

namespace {

struct Setup {
    Lattice lat;
    AtomisticSystem sys;
    TriMesh mesh;
    Blend blend;
    Mat2 B;
    double t_star;
};

// small coupled instance; defect_k = 0 or 2
Setup make_setup(long defect_k, double R_a = 5.0, long K = 3, bool loaded = true) {
    const EamParams pot;
    Setup s{{}, {}, {}, {}, Mat2::identity(), equilibrium_scale(pot)};
    const double rb = R_a + static_cast<double>(K);
    LatticeSpec spec;
    spec.region.layers = static_cast<long>(std::ceil(1.1547005383793 * (rb + 5.0))) + 1;
    spec.defect_k = defect_k;
    s.lat = build_lattice(spec);
    s.sys = make_system(s.lat, pot);
    const double rc = std::max(std::ceil(0.5 * R_a * R_a),
                               static_cast<double>(spec.region.layers)) + 6.0;
    s.mesh = build_graded_mesh(s.lat, SizeField{R_a, rb, rc, 1.5});
    s.blend = spline_beta(s.mesh, R_a, rb);
    s.B = loaded ? Mat2(1.03, 0.03, 0.0, 1.03) * Mat2::scale(s.t_star)
                 : Mat2::scale(s.t_star);
    return s;
}

NodalField random_field(const CoupledModel& m, unsigned seed, double amp = 0.05) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ud(-amp, amp);
    NodalField u(m.mesh->n_nodes());
    for (int n : m.free_nodes) u[n] = {ud(rng), ud(rng)};
    return u;
}

double nodal_inf(const NodalField& u) {
    double mx = 0;
    for (const auto& v : u) mx = std::max({mx, std::abs(v.x), std::abs(v.y)});
    return mx;
}

}  // namespace

TEST_CASE("BQCE energy vanishes at zero displacement") {
    Setup s = make_setup(2);
    CoupledModel m = make_model(Method::BQCE, s.sys, s.mesh, s.blend, s.B);
    CHECK(energy_bqce(m, NodalField(s.mesh.n_nodes())) == 0.0);
}

TEST_CASE("limit consistency: beta == 0 reduces BQCE to the atomistic energy") {
    // beta == 0 makes every site atomistic, so the mesh must resolve the
    // whole lattice: use a fully refined (no coarsening) instance
    const EamParams pot;
    Setup s{{}, {}, {}, {}, Mat2::identity(), equilibrium_scale(pot)};
    LatticeSpec spec;
    spec.region.layers = 10;
    spec.defect_k = 2;
    s.lat = build_lattice(spec);
    s.sys = make_system(s.lat, pot);
    s.mesh = build_graded_mesh(s.lat, SizeField{5, 7, 10, 1.5});
    s.blend = spline_beta(s.mesh, 5, 7);
    s.B = Mat2(1.03, 0.03, 0.0, 1.03) * Mat2::scale(s.t_star);
    REQUIRE(s.mesh.n_nodes() == s.lat.n_sites());

    Blend zero = s.blend;
    for (auto& v : zero.atom_values) v = 0.0;
    for (auto& v : zero.nodal) v = 0.0;
    CoupledModel mz = make_model(Method::BQCE, s.sys, s.mesh, zero, s.B);

    const NodalField u = random_field(mz, 101, 0.03);
    // atomistic oracle on the same displacement
    LoadedProblem prob = make_loaded_problem(s.sys, s.B, 1e9);
    Displacement ua(s.lat.n_sites());
    for (int site = 0; site < s.lat.n_sites(); ++site) {
        const int n = s.mesh.node_of_atom[site];
        if (n >= 0) ua[site] = u[n];
    }
    CHECK(energy_bqce(mz, u) == doctest::Approx(energy_atm(prob, ua)).epsilon(1e-11));

    // and the BQCF force field equals the atomistic force at free atom nodes
    const NodalField F = forces_bqcf(mz, u);
    const Displacement g = grad_atm(prob, ua);
    for (int n : mz.free_nodes) {
        const int site = s.mesh.atom_of_node[n];
        REQUIRE(site >= 0);
        CHECK(F[n].x == doctest::Approx(-g[site].x).epsilon(1e-9));
        CHECK(F[n].y == doctest::Approx(-g[site].y).epsilon(1e-9));
    }
}

TEST_CASE("limit consistency: beta == 1 reduces BQCE to the Cauchy-Born quadrature") {
    Setup s = make_setup(0);
    Blend one = s.blend;
    for (auto& v : one.atom_values) v = 1.0;
    for (auto& v : one.nodal) v = 1.0;
    CoupledModel m1 = make_model(Method::BQCE, s.sys, s.mesh, one, s.B);
    const NodalField u = random_field(m1, 103, 0.03);

    const auto W_B = cb_eval(s.B, s.sys.pot).density;
    double expect = 0.0;
    for (int t = 0; t < s.mesh.n_triangles(); ++t) {
        const Mat2 G = s.mesh.gradient(t, u);
        expect += s.mesh.tri_area[t] * (cb_eval(s.B + G, s.sys.pot).density - W_B);
    }
    CHECK(energy_bqce(m1, u) == doctest::Approx(expect).epsilon(1e-11));

    const NodalField F = forces_bqcf(m1, u);
    const NodalField gcb = grad_cauchy_born(m1, u);
    for (int n : m1.free_nodes) {
        CHECK(F[n].x == doctest::Approx(-gcb[n].x).epsilon(1e-10));
        CHECK(F[n].y == doctest::Approx(-gcb[n].y).epsilon(1e-10));
    }
}

TEST_CASE("BQCE and BGFC gradients match finite differences") {
    Setup s = make_setup(2);
    CoupledModel m = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    const NodalField u = random_field(m, 107, 0.05);

    std::mt19937 rng(211);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(m.free_nodes.size()) - 1);
    const double h = 1e-5;

    SUBCASE("BQCE") {
        const NodalField g = grad_bqce(m, u);
        for (int k = 0; k < 25; ++k) {
            const int n = m.free_nodes[pick(rng)];
            for (int c = 0; c < 2; ++c) {
                NodalField up = u, um = u;
                (c ? up[n].y : up[n].x) += h;
                (c ? um[n].y : um[n].x) -= h;
                const double fd = (energy_bqce(m, up) - energy_bqce(m, um)) / (2 * h);
                const double an = c ? g[n].y : g[n].x;
                CHECK(an == doctest::Approx(fd).epsilon(2e-6));
            }
        }
    }
    SUBCASE("BGFC") {
        const NodalField g = grad_bgfc(m, u);
        for (int k = 0; k < 25; ++k) {
            const int n = m.free_nodes[pick(rng)];
            for (int c = 0; c < 2; ++c) {
                NodalField up = u, um = u;
                (c ? up[n].y : up[n].x) += h;
                (c ? um[n].y : um[n].x) -= h;
                const double fd = (energy_bgfc(m, up) - energy_bgfc(m, um)) / (2 * h);
                const double an = c ? g[n].y : g[n].x;
                CHECK(an == doctest::Approx(fd).epsilon(2e-6));
            }
        }
    }
}

TEST_CASE("ghost forces: BQCE has them, BQCF and BGFC do not") {
    Setup s = make_setup(0, 5.0, 3, /*loaded=*/false);  // defect-free, B = F0
    CoupledModel me = make_model(Method::BQCE, s.sys, s.mesh, s.blend, s.B);
    CoupledModel mf = make_model(Method::BQCF, s.sys, s.mesh, s.blend, s.B);
    CoupledModel mg = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    const NodalField zero(s.mesh.n_nodes());

    const NodalField ge = grad_bqce(me, zero);
    const NodalField ff = forces_bqcf(mf, zero);
    const NodalField gg = grad_bgfc(mg, zero);

    CHECK(nodal_inf(ge) > 1e-4);   // spurious interface forces
    CHECK(nodal_inf(ff) <= 1e-10);
    CHECK(nodal_inf(gg) <= 1e-10);

    SUBCASE("BQCE ghost forces concentrate where the blend varies") {
        for (int n : me.free_nodes) {
            const int site = s.mesh.atom_of_node[n];
            const double r = site >= 0 ? norm(s.lat.positions[site] - s.blend.center) : 1e9;
            if (r < s.blend.R_a - s.sys.pot.r_cut - 0.5) {
                CHECK(std::abs(ge[n].x) <= 1e-12);
                CHECK(std::abs(ge[n].y) <= 1e-12);
            }
        }
    }
}

TEST_CASE("dead load: algebraic identities and locality") {
    Setup s = make_setup(2, 5.0, 3, /*loaded=*/false);
    CoupledModel m = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    const NodalField zero(s.mesh.n_nodes());

    SUBCASE("grad_bgfc(0) + forces_bqcf(0) = 0 at machine precision") {
        const NodalField g = grad_bgfc(m, zero);
        const NodalField f = forces_bqcf(m, zero);
        for (int n : m.free_nodes) {
            CHECK(std::abs(g[n].x + f[n].x) <= 1e-13);
            CHECK(std::abs(g[n].y + f[n].y) <= 1e-13);
        }
    }
    SUBCASE("dead load vanishes away from the blend annulus and the defect") {
        const NodalField& g = dead_load(m);
        const double rcut = s.sys.pot.r_cut;
        for (int n : m.free_nodes) {
            const Vec2 x = s.mesh.nodes[n];
            const double r = norm(x - s.blend.center);
            const bool near_blend = r > s.blend.R_a - rcut - 0.5 && r < s.blend.R_b + rcut + 0.5;
            const bool near_defect = r <= s.lat.r_def + 2 * rcut;
            if (!near_blend && !near_defect) {
                CHECK(std::abs(g[n].x) <= 1e-12);
                CHECK(std::abs(g[n].y) <= 1e-12);
            }
        }
    }
    SUBCASE("genuine defect forces cancel in g and survive in grad_bgfc(0)") {
        // near the core the BQCE gradient and the BQCF force are the exact
        // atomistic pair, so their sum (the dead load) vanishes there, while
        // grad_bgfc(0) = -forces_bqcf(0) keeps driving the defect relaxation
        const NodalField& g = dead_load(m);
        const NodalField gb = grad_bgfc(m, zero);
        double g_core = 0.0, gb_core = 0.0;
        for (int n : m.free_nodes) {
            if (norm(s.mesh.nodes[n] - s.blend.center) < 3.0) {
                g_core = std::max({g_core, std::abs(g[n].x), std::abs(g[n].y)});
                gb_core = std::max({gb_core, std::abs(gb[n].x), std::abs(gb[n].y)});
            }
        }
        CHECK(g_core <= 1e-12);
        CHECK(gb_core > 1e-3);
    }
}

TEST_CASE("the BGFC correction is exactly linear in the displacement") {
    Setup s = make_setup(2);
    CoupledModel m = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    const NodalField u = random_field(m, 113, 0.02);
    const NodalField v = random_field(m, 127, 0.02);

    auto corr = [&](const NodalField& w) { return energy_bgfc(m, w) - energy_bqce(m, w); };
    NodalField u2 = u, upv = u;
    for (size_t i = 0; i < u.size(); ++i) {
        u2[i] = 2.0 * u[i];
        upv[i] = u[i] + v[i];
    }
    CHECK(std::abs(corr(u2) - 2.0 * corr(u)) <= 1e-12);
    CHECK(std::abs(corr(upv) - corr(u) - corr(v)) <= 1e-12);
}

TEST_CASE("dead-load form agrees with the renormalized form on defect-free problems") {
    Setup s = make_setup(0);
    CoupledModel m = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    for (unsigned seed = 0; seed < 5; ++seed) {
        const NodalField u = random_field(m, 500 + seed, 0.04);
        CHECK(energy_bgfc(m, u) == doctest::Approx(energy_bgfc_renorm(m, u)).epsilon(1e-10));
    }
}

TEST_CASE("solve_coupled: all three schemes relax the di-vacancy") {
    Setup s = make_setup(2);
    SolverConfig cfg;
    cfg.grad_tol = 1e-8;
    cfg.max_iter = 20000;

    CoupledModel me = make_model(Method::BQCE, s.sys, s.mesh, s.blend, s.B);
    const CoupledSolve re = solve_coupled(me, cfg);
    REQUIRE(re.stats.converged);

    CoupledModel mg = make_model(Method::BGFC, s.sys, s.mesh, s.blend, s.B);
    const CoupledSolve rg = solve_coupled(mg, cfg);
    REQUIRE(rg.stats.converged);

    CoupledModel mf = make_model(Method::BQCF, s.sys, s.mesh, s.blend, s.B);
    const CoupledSolve rf = solve_coupled(mf, cfg);
    REQUIRE(rf.stats.converged);
    CHECK(std::isfinite(rf.energy));  // BQCE energy at the BQCF solution

    // force-based and corrected solutions are closer to each other than to BQCE
    double d_fg = 0, d_fe = 0;
    for (int n : mf.free_nodes) {
        d_fg = std::max(d_fg, norm(rf.u[n] - rg.u[n]));
        d_fe = std::max(d_fe, norm(rf.u[n] - re.u[n]));
    }
    CHECK(d_fg < d_fe);
}

TEST_CASE("force_balance on the conservative BQCE force matches minimize") {
    Setup s = make_setup(2, 4.0, 2);
    CoupledModel m = make_model(Method::BQCE, s.sys, s.mesh, s.blend, s.B);
    SolverConfig cfg;
    cfg.grad_tol = 1e-9;
    cfg.max_iter = 20000;
    const CoupledSolve ref = solve_coupled(m, cfg);
    REQUIRE(ref.stats.converged);

    NodalField u(s.mesh.n_nodes());
    auto ff = [&](const VecX& x, VecX& F) {
        for (size_t i = 0; i < m.free_nodes.size(); ++i)
            u[m.free_nodes[i]] = {x[2 * i], x[2 * i + 1]};
        NodalField g = grad_bqce(m, u);
        F.resize(x.size());
        for (size_t i = 0; i < m.free_nodes.size(); ++i) {
            F[2 * i] = -g[m.free_nodes[i]].x;
            F[2 * i + 1] = -g[m.free_nodes[i]].y;
        }
    };
    const SolveResult fres = force_balance(ff, VecX(2 * m.free_nodes.size(), 0.0), cfg);
    REQUIRE(fres.converged);
    double dmax = 0.0;
    for (size_t i = 0; i < fres.u.size(); ++i) dmax = std::max(dmax, std::abs(fres.u[i] - ref.stats.u[i]));
    CHECK(dmax <= 1e-6);
}
