#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "ac/femgrid.hpp"
#include "ac/study.hpp"

using namespace ac;

namespace {

Lattice hex_lattice(long layers, long defect_k = 0) {
    LatticeSpec spec;
    spec.region.layers = layers;
    spec.defect_k = defect_k;
    return build_lattice(spec);
}

TriMesh one_right_triangle() {
    TriMesh m;
    m.nodes = {{0, 0}, {1, 0}, {0, 1}};
    m.triangles = {{0, 1, 2}};
    m.tri_area = {0.5};
    m.tri_bary = {{1.0 / 3.0, 1.0 / 3.0}};
    m.tri_jinv = {inverse(Mat2(1, 0, 0, 1))};
    m.atom_of_node = {-1, -1, -1};
    m.clamped = {0, 0, 0};
    return m;
}

}  // namespace

TEST_CASE("no coarsening: the mesh is the micro-triangulation of the hexagon") {
    const Lattice lat = hex_lattice(10);
    const TriMesh mesh = build_graded_mesh(lat, SizeField{8, 8, 8, 1.5});
    CHECK(mesh.n_nodes() == lat.n_sites());
    for (int n = 0; n < mesh.n_nodes(); ++n) CHECK(mesh.atom_of_node[n] >= 0);
    // 6 K^2 triangles tile a K-layer hexagon
    CHECK(mesh.n_triangles() == 6 * 10 * 10);
    // total area equals the hexagon area
    double area = 0.0;
    for (double a : mesh.tri_area) area += a;
    CHECK(area == doctest::Approx(6 * 10 * 10 * micro_triangle_area(lat)).epsilon(1e-12));
}

TEST_CASE("graded mesh: growth, core identity, admissibility") {
    std::map<double, long> nodes_of;
    for (double ra : {8.0, 16.0, 32.0}) {
        const long K = static_cast<long>(std::ceil(std::cbrt(ra)));
        const double rb = ra + K;
        const long layers = static_cast<long>(std::ceil(1.1547005383793 * (rb + 5.0))) + 1;
        const Lattice lat = hex_lattice(layers);
        const double rc = std::max(std::ceil(0.5 * ra * ra), static_cast<double>(layers));
        const TriMesh mesh = build_graded_mesh(lat, SizeField{ra, rb, rc, 1.5});
        nodes_of[ra] = mesh.n_nodes();

        // core identity: atoms within B_{R_b} are nodes, bijectively
        int atoms_in = 0;
        for (int s = 0; s < lat.n_sites(); ++s) {
            if (norm(lat.positions[s]) <= rb) {
                ++atoms_in;
                REQUIRE(mesh.node_of_atom[s] >= 0);
                CHECK(mesh.atom_of_node[mesh.node_of_atom[s]] == s);
            }
        }
        CHECK(atoms_in > 0);

        // every triangle with barycenter inside B_{R_b} has three atom vertices
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            if (norm(mesh.tri_bary[t]) <= rb) {
                for (int k = 0; k < 3; ++k) CHECK(mesh.atom_of_node[mesh.triangles[t][k]] >= 0);
            }
        }

        // shape regularity and the mesh size bound
        CHECK(mesh.shape_const <= 40.0);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto& tr = mesh.triangles[t];
            const double h = std::max({norm(mesh.nodes[tr[0]] - mesh.nodes[tr[1]]),
                                       norm(mesh.nodes[tr[1]] - mesh.nodes[tr[2]]),
                                       norm(mesh.nodes[tr[2]] - mesh.nodes[tr[0]])});
            const double r = norm(mesh.tri_bary[t]);
            CHECK(h <= 4.0 * std::max(1.0, std::pow(r / ra, 1.5)) + 1e-9);
        }
    }

    // node growth consistent with (R_a)^2 log(R_a): fitted exponent in [1.8, 2.4]
    std::vector<std::pair<double, double>> pts;
    for (const auto& [ra, n] : nodes_of) pts.push_back({ra, static_cast<double>(n)});
    const double slope = fit_slope(pts);
    CHECK(slope >= 1.8);
    CHECK(slope <= 2.4);
}

TEST_CASE("vacancy slot is bridged conformally") {
    for (long k : {1L, 2L, 11L}) {
        const Lattice lat = hex_lattice(16, k);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{7, 9, 20, 1.5});
        // conformity and orientation are asserted by the builder; area must
        // equal the full polygon area (slot covered by bridge triangles)
        double area = 0.0;
        for (double a : mesh.tri_area) area += a;
        const Lattice full = [&] {
            LatticeSpec s;
            s.region.layers = lat.layers;
            s.region.elongation = lat.row_hi.i - lat.row_lo.i;
            return build_lattice(s);
        }();
        const TriMesh fmesh = build_graded_mesh(full, SizeField{7, 9, 20, 1.5});
        double farea = 0.0;
        for (double a : fmesh.tri_area) farea += a;
        CHECK(area == doctest::Approx(farea).epsilon(1e-10));
    }
}

TEST_CASE("midpoint quadrature") {
    SUBCASE("affine integrands are exact") {
        const Lattice lat = hex_lattice(9);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{4, 6, 14, 1.5});
        const double integral = midpoint_quadrature(
            mesh, [](const Vec2& x, int) { return 2.0 + 3.0 * x.x - 0.5 * x.y; });
        // oracle: integrate the affine function per triangle exactly (vertex average)
        double exact = 0.0;
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto& tr = mesh.triangles[t];
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                s += 2.0 + 3.0 * mesh.nodes[tr[k]].x - 0.5 * mesh.nodes[tr[k]].y;
            exact += mesh.tri_area[t] * s / 3.0;
        }
        CHECK(integral == doctest::Approx(exact).epsilon(1e-13));
    }
    SUBCASE("constant one integrates to the mesh area") {
        const Lattice lat = hex_lattice(6);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{4, 4, 4, 1.5});
        double area = 0.0;
        for (double a : mesh.tri_area) area += a;
        CHECK(midpoint_quadrature(mesh, [](const Vec2&, int) { return 1.0; }) ==
              doctest::Approx(area).epsilon(1e-14));
    }
    SUBCASE("|x|^2 on the unit right triangle shows the known midpoint defect") {
        const TriMesh m = one_right_triangle();
        const double q = midpoint_quadrature(m, [](const Vec2& x, int) { return norm2(x); });
        // exact integral of x^2+y^2 over the triangle is 1/6; midpoint gives |bary|^2/2
        CHECK(q == doctest::Approx((2.0 / 9.0) * 0.5).epsilon(1e-14));
        CHECK(std::abs(q - 1.0 / 6.0) > 1e-3);
    }
}

TEST_CASE("P1 gradients") {
    const Lattice lat = hex_lattice(11);
    const TriMesh mesh = build_graded_mesh(lat, SizeField{4, 6, 24, 1.5});

    SUBCASE("affine fields reproduce their gradient on every triangle") {
        const Mat2 G(0.4, -0.2, 0.1, 0.7);
        std::vector<Vec2> nodal(mesh.n_nodes());
        for (int n = 0; n < mesh.n_nodes(); ++n) nodal[n] = G * mesh.nodes[n];
        const auto grads = p1_gradient(mesh, nodal);
        for (const auto& g : grads) CHECK(frobenius(g - G) <= 1e-10);
    }
    SUBCASE("constant fields have zero gradient") {
        std::vector<Vec2> nodal(mesh.n_nodes(), Vec2{1.5, -2.0});
        for (const auto& g : p1_gradient(mesh, nodal)) CHECK(frobenius(g) <= 1e-13);
    }
    SUBCASE("random nodal data matches a 3-point plane-fit oracle") {
        std::mt19937 rng(41);
        std::uniform_real_distribution<double> ud(-1, 1);
        std::vector<Vec2> nodal(mesh.n_nodes());
        for (auto& v : nodal) v = {ud(rng), ud(rng)};
        for (int t = 0; t < mesh.n_triangles(); t += 97) {
            const auto& tr = mesh.triangles[t];
            // solve the 2x2 system [e1 e2]^T grad_row = [d1 d2] per component
            const Vec2 e1 = mesh.nodes[tr[1]] - mesh.nodes[tr[0]];
            const Vec2 e2 = mesh.nodes[tr[2]] - mesh.nodes[tr[0]];
            const Mat2 M(e1.x, e1.y, e2.x, e2.y);
            const Mat2 Minv = inverse(M);
            const Mat2 G = mesh.gradient(t, nodal);
            for (int comp = 0; comp < 2; ++comp) {
                const double d1 = comp == 0 ? nodal[tr[1]].x - nodal[tr[0]].x
                                            : nodal[tr[1]].y - nodal[tr[0]].y;
                const double d2 = comp == 0 ? nodal[tr[2]].x - nodal[tr[0]].x
                                            : nodal[tr[2]].y - nodal[tr[0]].y;
                const Vec2 row = Minv * Vec2(d1, d2);
                CHECK(G(comp, 0) == doctest::Approx(row.x).epsilon(1e-10));
                CHECK(G(comp, 1) == doctest::Approx(row.y).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("micro interpolant") {
    const Lattice lat = hex_lattice(8);

    SUBCASE("affine reproduction") {
        const Mat2 G(0.2, 0.05, -0.1, 0.3);
        std::vector<Vec2> u(lat.n_sites());
        for (int s = 0; s < lat.n_sites(); ++s) u[s] = G * lat.positions[s];
        for_each_micro_triangle(lat, [&](int a, int b, int c) {
            CHECK(frobenius(micro_gradient(lat, a, b, c, u) - G) <= 1e-12);
        });
    }
    SUBCASE("zero displacement has zero seminorm") {
        std::vector<Vec2> u(lat.n_sites());
        double s2 = 0.0;
        for_each_micro_triangle(lat, [&](int a, int b, int c) {
            const double f = frobenius(micro_gradient(lat, a, b, c, u));
            s2 += f * f;
        });
        CHECK(s2 == 0.0);
    }
    SUBCASE("L2 gradient norm is equivalent to the lattice seminorm") {
        std::mt19937 rng(59);
        std::uniform_real_distribution<double> ud(-1, 1);
        const NeighborTable nn = build_neighbor_table(lat, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Vec2> u(lat.n_sites());
            for (auto& v : u) v = {ud(rng), ud(rng)};
            double h1 = 0.0;
            const double area = micro_triangle_area(lat);
            for_each_micro_triangle(lat, [&](int a, int b, int c) {
                const double f = frobenius(micro_gradient(lat, a, b, c, u));
                h1 += area * f * f;
            });
            double semi = 0.0;
            for (int s = 0; s < lat.n_sites(); ++s)
                for (auto k = nn.offsets[s]; k < nn.offsets[s + 1]; ++k)
                    semi += norm2(u[nn.nbr[k]] - u[s]);
            const double ratio = std::sqrt(h1) / std::sqrt(semi);
            CHECK(ratio > 0.25);
            CHECK(ratio < 4.0);
        }
    }
}

TEST_CASE("transfer") {
    const Lattice lat = hex_lattice(12);
    const TriMesh mesh = build_graded_mesh(lat, SizeField{4, 5, 26, 1.5});
    // the target covers the coarse annulus of the mesh
    const Lattice target = hex_lattice(24);

    SUBCASE("coinciding nodes are exact; affine fields reproduce everywhere") {
        const Mat2 G(0.3, -0.15, 0.25, 0.1);
        std::vector<Vec2> nodal(mesh.n_nodes());
        for (int n = 0; n < mesh.n_nodes(); ++n) nodal[n] = G * mesh.nodes[n];
        const auto u = transfer(mesh, nodal, target);
        for (int s = 0; s < target.n_sites(); ++s) {
            const int ms = lat.find(target.coords[s]);
            if (ms >= 0 && mesh.node_of_atom[ms] >= 0) {
                CHECK(u[s].x == nodal[mesh.node_of_atom[ms]].x);
                CHECK(u[s].y == nodal[mesh.node_of_atom[ms]].y);
            } else if (hex_gauge_to_row(lat, target.positions[s]) < 25.0) {
                CHECK(norm(u[s] - G * target.positions[s]) <= 1e-10);
            }
        }
    }
    SUBCASE("atoms outside the mesh get the clamped far-field zero") {
        const Lattice big = hex_lattice(60);
        std::vector<Vec2> nodal(mesh.n_nodes(), Vec2{1.0, 1.0});
        const auto u = transfer(mesh, nodal, big);
        bool found_outside = false;
        for (int s = 0; s < big.n_sites(); ++s) {
            if (hex_gauge_to_row(lat, big.positions[s]) > 40.0) {
                found_outside = true;
                CHECK(u[s].x == 0.0);
                CHECK(u[s].y == 0.0);
            }
        }
        CHECK(found_outside);
    }
    SUBCASE("interpolated values match an independent barycentric oracle") {
        std::mt19937 rng(71);
        std::uniform_real_distribution<double> ud(-1, 1);
        std::vector<Vec2> nodal(mesh.n_nodes());
        for (auto& v : nodal) v = {ud(rng), ud(rng)};
        const auto u = transfer(mesh, nodal, target);
        int checked = 0;
        for (int s = 0; s < target.n_sites() && checked < 200; ++s) {
            const int ms = lat.find(target.coords[s]);
            if (ms >= 0 && mesh.node_of_atom[ms] >= 0) continue;  // exact path
            std::array<double, 3> bc{};
            const int t = mesh.locate(target.positions[s], bc);
            if (t < 0) continue;
            ++checked;
            const auto& tr = mesh.triangles[t];
            // recompute barycentrics by Cramer's rule
            const Vec2 a = mesh.nodes[tr[0]], b = mesh.nodes[tr[1]], c = mesh.nodes[tr[2]];
            const double den = cross(b - a, c - a);
            const double l1 = cross(target.positions[s] - a, c - a) / den;
            const double l2 = cross(b - a, target.positions[s] - a) / den;
            const Vec2 expect =
                (1 - l1 - l2) * nodal[tr[0]] + l1 * nodal[tr[1]] + l2 * nodal[tr[2]];
            CHECK(norm(u[s] - expect) <= 1e-12);
        }
        CHECK(checked > 50);
    }
}

TEST_CASE("mesh JSON export carries nodes, triangles and the atom map") {
    const Lattice lat = hex_lattice(6);
    const TriMesh mesh = build_graded_mesh(lat, SizeField{4, 4, 4, 1.5});
    const std::string js = mesh.to_json();
    CHECK(js.find("\"nodes\"") != std::string::npos);
    CHECK(js.find("\"triangles\"") != std::string::npos);
    CHECK(js.find("\"atom_of_node\"") != std::string::npos);
}
