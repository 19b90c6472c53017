#include "doctest.h"

#include <cmath>
#include <random>

#include "ac/potential.hpp"

using namespace ac;

namespace {

SiteState identity_state(double r_cut) {
    SiteState s;
    s.bond_vectors = homogeneous_stencil(r_cut);
    return s;
}

}  // namespace

TEST_CASE("pair terms at reference values") {
    const EamParams p;
    SUBCASE("r=1 is the Morse minimum: phi=-1, phi'=0") {
        const auto t = pair_terms(1.0, p);
        CHECK(t.phi == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(t.dphi == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("psi(1) = e^{-3}") {
        CHECK(pair_terms(1.0, p).psi == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
    }
    SUBCASE("phi(2) = e^{-8.8} - 2 e^{-4.4}") {
        CHECK(pair_terms(2.0, p).phi ==
              doctest::Approx(std::exp(-8.8) - 2.0 * std::exp(-4.4)).epsilon(1e-14));
    }
    SUBCASE("r <= 0 throws") { CHECK_THROWS(pair_terms(0.0, p)); }
}

TEST_CASE("embedding function") {
    const EamParams p;
    SUBCASE("stationary at the reference density") {
        const auto e = embed(p.rho0, p);
        CHECK(e.F == 0.0);
        CHECK(e.dF == 0.0);
    }
    SUBCASE("F(rho0 + 1) = 2c = 10") {
        CHECK(embed(p.rho0 + 1.0, p).F == doctest::Approx(10.0).epsilon(1e-14));
    }
    SUBCASE("even about rho0") {
        CHECK(embed(p.rho0 - 1.0, p).F == doctest::Approx(embed(p.rho0 + 1.0, p).F));
    }
}

TEST_CASE("analytic derivatives match finite differences on random inputs") {
    const EamParams p;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ur(0.7, 2.5), urho(-0.5, 0.5);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const double r = ur(rng);
        const auto t = pair_terms(r, p);
        const double fd_phi = (pair_terms(r + h, p).phi - pair_terms(r - h, p).phi) / (2 * h);
        const double fd_psi = (pair_terms(r + h, p).psi - pair_terms(r - h, p).psi) / (2 * h);
        CHECK(t.dphi == doctest::Approx(fd_phi).epsilon(1e-6));
        CHECK(t.dpsi == doctest::Approx(fd_psi).epsilon(1e-6));

        const double rho = p.rho0 + urho(rng);
        const double fd_F = (embed(rho + h, p).F - embed(rho - h, p).F) / (2 * h);
        if (std::abs(fd_F) > 1e-12)
            CHECK(embed(rho, p).dF == doctest::Approx(fd_F).epsilon(1e-6));
    }
}

TEST_CASE("site energy on the defect-free identity stencil") {
    const EamParams p;
    const SiteState s = identity_state(p.r_cut);
    const double r3 = std::sqrt(3.0);
    const double expected =
        6 * pair_terms(1, p).phi + 6 * pair_terms(r3, p).phi + 6 * pair_terms(2, p).phi +
        embed(6 * pair_terms(1, p).psi + 6 * pair_terms(r3, p).psi + 6 * pair_terms(2, p).psi, p).F;
    CHECK(site_energy(p, s) == doctest::Approx(expected).epsilon(1e-14));

    SUBCASE("empty bond list gives the embedding of zero density") {
        CHECK(site_energy(p, SiteState{}) == doctest::Approx(embed(0.0, p).F));
    }
    SUBCASE("uniformly scaled bonds equal det(A) * W(tI)") {
        for (double t : {0.95, 1.0, 1.05}) {
            SiteState st;
            for (const auto& g : s.bond_vectors) st.bond_vectors.push_back(t * g);
            const double w = cb_eval(Mat2::scale(t), p).density;
            CHECK(site_energy(p, st) ==
                  doctest::Approx(w * det(triangular_basis())).epsilon(1e-13));
        }
    }
}

TEST_CASE("site gradient") {
    const EamParams p;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pert(-0.05, 0.05);

    SUBCASE("matches central finite differences of site_energy") {
        SiteState s = identity_state(p.r_cut);
        for (auto& g : s.bond_vectors) g += Vec2(pert(rng), pert(rng));
        const auto grad = site_gradient(p, s);
        const double h = 1e-5;
        for (size_t k = 0; k < s.bond_vectors.size(); ++k) {
            for (int c = 0; c < 2; ++c) {
                SiteState sp = s, sm = s;
                (c == 0 ? sp.bond_vectors[k].x : sp.bond_vectors[k].y) += h;
                (c == 0 ? sm.bond_vectors[k].x : sm.bond_vectors[k].y) -= h;
                const double fd = (site_energy(p, sp) - site_energy(p, sm)) / (2 * h);
                const double an = c == 0 ? grad[k].x : grad[k].y;
                CHECK(an == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
    SUBCASE("sums to zero over the symmetric stencil at the equilibrium scale") {
        const double t = equilibrium_scale(p);
        SiteState s;
        for (const auto& g : identity_state(p.r_cut).bond_vectors) s.bond_vectors.push_back(t * g);
        Vec2 sum;
        for (const auto& g : site_gradient(p, s)) sum += g;
        CHECK(norm(sum) <= 1e-12);
    }
    SUBCASE("single bond along e1 gives a gradient along e1") {
        SiteState s;
        s.bond_vectors.push_back({1.0, 0.0});
        const auto g = site_gradient(p, s);
        CHECK(std::abs(g[0].y) <= 1e-15);
    }
}

TEST_CASE("rotational invariance of the site energy") {
    const EamParams p;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> ang(0.0, 2 * M_PI), pert(-0.05, 0.05);
    SiteState s = identity_state(p.r_cut);
    for (auto& g : s.bond_vectors) g += Vec2(pert(rng), pert(rng));
    const double e0 = site_energy(p, s);
    for (int k = 0; k < 5; ++k) {
        const double a = ang(rng);
        const Mat2 Q(std::cos(a), -std::sin(a), std::sin(a), std::cos(a));
        SiteState sq;
        for (const auto& g : s.bond_vectors) sq.bond_vectors.push_back(Q * g);
        CHECK(site_energy(p, sq) == doctest::Approx(e0).epsilon(1e-13));
    }
}

TEST_CASE("point symmetry: the energy from the negated stencil is identical") {
    const EamParams p;
    SiteState s = identity_state(p.r_cut);
    SiteState sneg;
    for (const auto& g : s.bond_vectors) sneg.bond_vectors.push_back(-g);
    CHECK(site_energy(p, sneg) == doctest::Approx(site_energy(p, s)).epsilon(1e-15));
}

TEST_CASE("Cauchy-Born evaluation") {
    const EamParams p;
    SUBCASE("stress vanishes at the equilibrium scale") {
        const double t = equilibrium_scale(p);
        CHECK(frobenius(cb_eval(Mat2::scale(t), p).stress) <= 1e-8);
    }
    SUBCASE("W'(0) = 0 by the difference convention") {
        const double w0 = cb_eval(Mat2::identity(), p).density;
        CHECK(w0 - w0 == 0.0);
    }
    SUBCASE("stress matches finite differences of W componentwise") {
        const Mat2 F(1.02, 0.015, -0.01, 0.98);
        const auto cb = cb_eval(F, p);
        const double h = 1e-5;
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                Mat2 Fp = F, Fm = F;
                Fp(r, c) += h;
                Fm(r, c) -= h;
                const double fd = (cb_eval(Fp, p).density - cb_eval(Fm, p).density) / (2 * h);
                CHECK(cb.stress(r, c) == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
    SUBCASE("non-invertible F throws") { CHECK_THROWS(cb_eval(Mat2(1, 0, 0, 0), p)); }
}

TEST_CASE("equilibrium scale") {
    const EamParams p;
    const double t = equilibrium_scale(p);
    SUBCASE("inside the physical bracket") {
        CHECK(t > 0.9);
        CHECK(t < 1.1);
    }
    SUBCASE("minimality against nearby scales") {
        const double w = cb_eval(Mat2::scale(t), p).density;
        CHECK(w <= cb_eval(Mat2::scale(t + 1e-4), p).density);
        CHECK(w <= cb_eval(Mat2::scale(t - 1e-4), p).density);
    }
    SUBCASE("radial derivative vanishes") {
        const Mat2 s = cb_eval(Mat2::scale(t), p).stress;
        CHECK(std::abs(s(0, 0) + s(1, 1)) <= 1e-8);
    }
}
