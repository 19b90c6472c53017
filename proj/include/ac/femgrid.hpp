#ifndef AC_FEMGRID_HPP
#define AC_FEMGRID_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ac/geometry.hpp"
#include "ac/lattice.hpp"

// Graded P1 triangulation: the atomistic core is meshed by the canonical
// micro-triangulation of the lattice (every node an atom), surrounded by
// coarsened concentric hexagonal rings out to the computational radius.
// Quadrature is the P0 midpoint rule.

namespace ac {

struct SizeField {
    double R_a = 0.0;      // atomistic radius (blend support starts here)
    double R_b = 0.0;      // blend ends here; fully refined out to R_b + margin
    double R_c = 0.0;      // computational extent, in hexagon layers
    double exponent = 1.5; // 3/2 for point defects, 1 for dislocations

    void validate() const;
};

struct TriMesh {
    const Lattice* lat = nullptr;

    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;  // CCW node triples
    std::vector<int> atom_of_node;              // lattice site or -1
    std::vector<int> node_of_atom;              // node or -1, size lat->n_sites()
    std::vector<std::uint8_t> clamped;          // outer-boundary nodes (v=0 there)

    std::vector<double> tri_area;
    std::vector<Vec2> tri_bary;
    std::vector<Mat2> tri_jinv;  // inverse of the edge matrix, for P1 gradients

    long micro_layers = 0;  // hop-layer extent of the fully refined core
    double h_max = 0.0;
    double shape_const = 0.0;  // max h_T^2 / |T|
    int n_free = 0;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }

    // gradient of the P1 interpolant on triangle t; (grad u)_{ij} = du_i/dx_j
    Mat2 gradient(int t, const std::vector<Vec2>& nodal) const;
    Vec2 gradient_scalar(int t, const std::vector<double>& nodal) const;

    // point location: triangle containing x, or -1; barycentric coords out
    int locate(const Vec2& x, std::array<double, 3>& bc) const;

    std::string to_json() const;

    // uniform-grid point-location index
    struct LocGrid {
        Vec2 lo, hi;
        double cell = 1.0;
        int nx = 0, ny = 0;
        std::vector<std::vector<std::int32_t>> bins;
    };
    LocGrid grid_;
    void build_locator();
};

// Builds the graded mesh around the lattice's defect row.  The fully refined
// region covers B_{R_b + margin}; rings follow edge length
// h(r) = max(1, (r/R_a)^exponent) out to R_c hexagon layers.
TriMesh build_graded_mesh(const Lattice& lat, const SizeField& sf);

// Midpoint (one-point barycenter) quadrature: sum |T| f(bary_T, T).
double midpoint_quadrature(const TriMesh& mesh, const std::function<double(const Vec2&, int)>& f);

// Per-triangle P1 gradients for a full nodal field.
std::vector<Mat2> p1_gradient(const TriMesh& mesh, const std::vector<Vec2>& nodal);

// Evaluates the P1 field at every site of `target` (exact at coinciding
// nodes, 0 outside the mesh).
std::vector<Vec2> transfer(const TriMesh& mesh, const std::vector<Vec2>& nodal,
                           const Lattice& target);
std::vector<double> transfer_scalar(const TriMesh& mesh, const std::vector<double>& nodal,
                                    const Lattice& target);

// Canonical micro-triangulation of a lattice region: visits each lattice cell
// triangle whose three corners are present, f(s0, s1, s2) with CCW corners.
// Triangles incident to removed sites are skipped.
void for_each_micro_triangle(const Lattice& lat, const std::function<void(int, int, int)>& f);

// Gradient of the P1 interpolant of scalar/vector site data on one micro
// triangle (corners s0, s1, s2 as passed by for_each_micro_triangle).
Mat2 micro_gradient(const Lattice& lat, int s0, int s1, int s2, const std::vector<Vec2>& u);
Vec2 micro_gradient_scalar(const Lattice& lat, int s0, int s1, int s2,
                           const std::vector<double>& u);

// Area of one micro triangle (constant over the lattice).
double micro_triangle_area(const Lattice& lat);

}  // namespace ac

#endif
