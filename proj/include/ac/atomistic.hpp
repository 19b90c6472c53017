#ifndef AC_ATOMISTIC_HPP
#define AC_ATOMISTIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ac/geometry.hpp"
#include "ac/lattice.hpp"
#include "ac/potential.hpp"
#include "ac/solver.hpp"

// Exact atomistic model: energy differences relative to the homogeneous
// predictor B*x, assembled forces, and the truncated-domain reference solve.
//
// Energies are sums of site-energy differences Phi_a(Bx+u) - Phi_a(Bx); only
// sites whose stencil can feel the free region contribute, so the sum is
// finite and exactly zero at u = 0.

namespace ac {

// Displacement relative to the predictor, one 2-vector per lattice site.
// Entries at clamped sites (outside the free radius) are zero.
using Displacement = std::vector<Vec2>;

std::string displacement_to_json(const Displacement& u);
Displacement displacement_from_json(const std::string& text);

// Lattice + potential with the cached neighbor table; shareable between
// problems with different loading or clamping.
struct AtomisticSystem {
    const Lattice* lat = nullptr;
    EamParams pot;
    NeighborTable table;
};

AtomisticSystem make_system(const Lattice& lat, const EamParams& pot);

struct LoadedProblem {
    const AtomisticSystem* sys = nullptr;
    Mat2 B = Mat2::identity();
    double free_radius = 0.0;
    Vec2 center;  // free ball center (defect center)

    // per-direction reference bond data under the predictor (the predictor
    // image of every stencil direction is site-independent)
    std::vector<Vec2> bond_g0;
    std::vector<double> bond_r0, bond_e0, bond_psi0;
    std::vector<double> baseline_rho;  // predictor electron density per site

    std::vector<std::uint8_t> is_free;
    std::vector<std::int32_t> free_sites;
    std::vector<std::int32_t> active;  // sites within free_radius + r_cut

    int n_free() const { return static_cast<int>(free_sites.size()); }

    // Re-derives the free/active site lists; predictor and baselines are kept.
    void set_free_radius(double r);
};

LoadedProblem make_loaded_problem(const AtomisticSystem& sys, const Mat2& B, double free_radius);

double energy_atm(const LoadedProblem& prob, const Displacement& u);
Displacement grad_atm(const LoadedProblem& prob, const Displacement& u);

// Fused evaluation used by the solvers; returns the energy and fills grad
// (zeroed at clamped sites).
double energy_grad_atm(const LoadedProblem& prob, const Displacement& u, Displacement& grad);

// Free-DOF packing for the generic solvers.
VecX pack_free(const LoadedProblem& prob, const Displacement& u);
Displacement unpack_free(const LoadedProblem& prob, const VecX& x);

// Minimizes the atomistic energy from u = 0 to |grad|_inf <= tol; throws on
// solver failure.  The result is the ground truth for error norms.
Displacement solve_reference(const LoadedProblem& prob, double tol, int max_iter = 20000,
                             const Displacement* initial = nullptr);

}  // namespace ac

#endif
