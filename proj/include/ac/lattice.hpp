#ifndef AC_LATTICE_HPP
#define AC_LATTICE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ac/geometry.hpp"

// 2D triangular reference lattice with optional vacancy defects.
//
// Sites are the points basis*(i,j) of an elongated hexagonal region, indexed
// lexicographically by their integer coordinates (i major, j minor).  The
// region is the set of points within `layers` hops of a seed row along e1;
// the hop metric is the graph distance of the 6-neighbor triangular lattice.

namespace ac {

// Triangular lattice basis with nearest-neighbor spacing 1:
//   e1 = (1, 0),  e2 = (cos 60deg, sin 60deg)
Mat2 triangular_basis();

struct IntPt {
    long i = 0, j = 0;
    bool operator==(const IntPt& o) const { return i == o.i && j == o.j; }
    bool operator<(const IntPt& o) const { return i < o.i || (i == o.i && j < o.j); }
};

// Hop (graph) distance between integer coordinates on the triangular lattice.
long hop_distance(IntPt a, IntPt b);

// Sites removed to create the defect: k consecutive sites along e1.
// Odd k: {-(k-1)/2 e1, ..., (k-1)/2 e1}.  Even k: {-(k/2-1) e1, ..., (k/2) e1}.
std::vector<IntPt> vacancy_set(long k);

struct HexRegion {
    IntPt center{0, 0};
    long layers = 0;       // hop layers around the seed row
    long elongation = -1;  // seed row spans `elongation` bonds along e1; -1 = from defect_k
};

struct LatticeSpec {
    Mat2 basis = triangular_basis();
    HexRegion region;
    long defect_k = 0;
};

struct Lattice {
    Mat2 basis;
    double det_basis = 0.0;

    std::vector<IntPt> coords;     // integer coordinates per site, lexicographic
    std::vector<Vec2> positions;   // basis * coords
    std::vector<IntPt> removed;    // vacancy coordinates, sorted
    double r_def = 0.0;            // radius of a ball around defect_center() containing all vacancies

    long layers = 0;
    IntPt row_lo{0, 0}, row_hi{0, 0};  // seed row endpoints (defect row, or center)

    int n_sites() const { return static_cast<int>(coords.size()); }

    // Index of the site at integer coordinates, or -1 (absent / removed).
    int find(IntPt p) const;
    bool is_removed(IntPt p) const;

    // Hop distance from integer coordinates to the seed row.
    long hops_to_row(IntPt p) const;

    // Cartesian midpoint of the seed row; the natural center for radial fields.
    Vec2 defect_center() const;

    std::string to_json() const;
    static Lattice from_json(const std::string& text);

    // internal homogeneous-region index: per-i row of contiguous j values
    struct Row {
        long j_lo = 0, j_hi = -1;
        std::int64_t base = 0;  // index of (i, j_lo) counting removed sites as present
    };
    long i_lo_ = 0;
    std::vector<Row> rows_;

    // Rebuilds rows_/base offsets from coords+removed (used after deserialization).
    void rebuild_index();
};

Lattice build_lattice(const LatticeSpec& spec);

// Interaction stencil of one site: all present lattice directions within r_cut
// (closed ball, reference configuration).
struct Stencil {
    std::vector<IntPt> offsets;
    std::vector<Vec2> directions;  // basis * offsets
    double r_cut = 0.0;
};

// All integer offsets (excluding 0) with |basis*offset| <= r_cut.
std::vector<IntPt> stencil_offsets(const Mat2& basis, double r_cut);

Stencil neighbor_stencil(const Lattice& lat, int site, double r_cut);

// Compressed neighbor lists for all sites (homogeneous-stencil candidates
// filtered by presence).  Neighbor order follows the candidate offset order;
// dir[k] indexes the candidate direction of bond k, so per-direction
// reference quantities can be tabulated once.
struct NeighborTable {
    std::vector<std::int64_t> offsets;  // size n_sites+1
    std::vector<std::int32_t> nbr;      // site indices
    std::vector<std::int8_t> dir;       // candidate index per bond
    std::vector<IntPt> dirs;            // candidate directions
    double r_cut = 0.0;

    int degree(int site) const {
        return static_cast<int>(offsets[site + 1] - offsets[site]);
    }
};

NeighborTable build_neighbor_table(const Lattice& lat, double r_cut);

// Gauge whose unit ball is the hexagon spanned by the 6 nearest-neighbor
// directions; level set L is the hexagonal "layer L" boundary.
double hex_gauge(const Vec2& v);

// Gauge of x relative to the lattice's seed row (elongated-hexagon layers).
double hex_gauge_to_row(const Lattice& lat, const Vec2& x);

}  // namespace ac

#endif
