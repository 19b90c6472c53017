#ifndef AC_ANTIPLANE_HPP
#define AC_ANTIPLANE_HPP

#include <cstdint>
#include <vector>

#include "ac/blending.hpp"
#include "ac/femgrid.hpp"
#include "ac/geometry.hpp"
#include "ac/lattice.hpp"
#include "ac/solver.hpp"

// Anti-plane screw dislocation: scalar out-of-plane displacements on the
// defect-free triangular lattice with nearest-neighbor interactions,
//
//   Phi_a(y) = G( sum_{rho in NN} phi(D_rho y) ),  G(s) = 1 + s^2/2,
//   phi(r) = sin^2(pi r),
//
// measured relative to the linear-elastic predictor
// ylin(a) = arg(a - core) / (2 pi).  Since dPhi vanishes at zero bond
// differences, the dead-load correction is identically zero and the blended
// energy scheme needs no ghost-force correction term.

namespace ac {

using ScalarField = std::vector<double>;

// Linear elasticity predictor; branch cut along the -e1 half line from core.
double ylin(const Vec2& a, const Vec2& core);

// Reduce a predictor bond difference into (-1/2, 1/2] (phi has period 1).
double reduce_mod1(double d);

struct AntiplaneModel {
    const Lattice* lat = nullptr;  // defect-free
    NeighborTable table;           // exactly the 6 nearest neighbors
    Vec2 core;

    std::vector<double> dlin;      // predictor bond differences, CSR-aligned
    std::vector<double> s_lin;     // per-site sum of phi over predictor bonds
    double free_radius = 0.0;
    std::vector<std::uint8_t> is_free;
    std::vector<std::int32_t> free_sites;
    std::vector<std::int32_t> active;

    void set_free_radius(double r);
};

// core defaults to the barycenter of the lattice cell at the defect center
AntiplaneModel make_antiplane(const Lattice& lat, double free_radius);
AntiplaneModel make_antiplane(const Lattice& lat, double free_radius, const Vec2& core);

// Site energy difference G(s(y)) - G(s(ylin)) at one site.
double site_energy_ap(const AntiplaneModel& m, const ScalarField& u, int site);

double ap_energy(const AntiplaneModel& m, const ScalarField& u);
double ap_energy_grad(const AntiplaneModel& m, const ScalarField& u, ScalarField& grad);

ScalarField ap_solve_reference(const AntiplaneModel& m, double tol, int max_iter = 20000,
                               const ScalarField* initial = nullptr);

// Scalar Cauchy-Born density W(g) = G(sum phi(g . rho)) / det basis.
double ap_cb_density(const Vec2& g);
Vec2 ap_cb_stress(const Vec2& g);

// Blended scalar scheme on the graded mesh (BQCE; identical to BGFC here).
struct ApCoupled {
    const AntiplaneModel* apm = nullptr;
    const TriMesh* mesh = nullptr;
    const Blend* blend = nullptr;

    std::vector<double> beta_tri;
    std::vector<std::int32_t> atoms_blend, atoms_ext, free_nodes;
    std::vector<double> dlin;   // CSR-aligned predictor differences (model lattice)
    std::vector<double> s_lin;  // per-site predictor densities
    double W0 = 0.0;
};

ApCoupled make_ap_coupled(const AntiplaneModel& apm, const TriMesh& mesh, const Blend& blend);

double ap_energy_grad_coupled(const ApCoupled& m, const ScalarField& u_nodal, ScalarField& grad);

// The would-be dead load sum_a (1-beta(a)) <dPhi_a(0), .>; identically zero
// because phi'(0) = 0.  Assembled explicitly so the identity can be audited.
ScalarField ap_dead_load(const ApCoupled& m);

struct ApSolve {
    ScalarField u;
    SolveResult stats;
    double energy = 0.0;
};

ApSolve ap_solve_coupled(const ApCoupled& m, const SolverConfig& cfg);

}  // namespace ac

#endif
