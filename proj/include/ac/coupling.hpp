#ifndef AC_COUPLING_HPP
#define AC_COUPLING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ac/atomistic.hpp"
#include "ac/blending.hpp"
#include "ac/femgrid.hpp"
#include "ac/geometry.hpp"
#include "ac/solver.hpp"

// Coupled energy functionals and forces on the graded mesh:
//
//   BQCE   sum_a (1-beta(a)) [Phi_a(Bx+u) - Phi_a(Bx)]
//          + midpoint quadrature of beta [W(B+grad u) - W(B)]
//   BQCF   nodal force blend (1-beta) F_atm + beta F_cb  (non-conservative)
//   BGFC   BQCE minus the dead-load correction <g, u>,
//          g = grad_bqce(0) + forces_bqcf(0)
//
// All covectors are stored as energy gradients; forces are negative
// gradients.  Free degrees of freedom are the non-clamped mesh nodes.

namespace ac {

enum class Method { ATM, BQCE, BQCF, BGFC };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

// nodal displacement field, one 2-vector per mesh node (zero at clamped nodes)
using NodalField = std::vector<Vec2>;

struct CoupledModel {
    Method kind = Method::BQCE;
    const AtomisticSystem* sys = nullptr;  // model lattice + potential + table
    const TriMesh* mesh = nullptr;
    const Blend* blend = nullptr;
    Mat2 B = Mat2::identity();

    std::vector<std::int32_t> atoms_blend;  // sites with beta < 1
    std::vector<std::int32_t> atoms_ext;    // atoms_blend plus one-cutoff collar
    // per-direction predictor bond data and per-site predictor densities
    std::vector<Vec2> bond_g0;
    std::vector<double> bond_r0, bond_e0, bond_psi0;
    std::vector<double> baseline_rho;
    std::vector<double> beta_tri;           // barycentric beta per triangle
    std::vector<std::int32_t> free_nodes;
    double W_B = 0.0;                       // W(B)
    Mat2 stress_B;                          // dW(B)

    std::optional<NodalField> dead;  // cached dead load (BGFC)

    int n_free() const { return mesh->n_free; }
};

// Assembles the model; for kind == BGFC the dead load is computed eagerly.
CoupledModel make_model(Method kind, const AtomisticSystem& sys, const TriMesh& mesh,
                        const Blend& blend, const Mat2& B);

double energy_bqce(const CoupledModel& m, const NodalField& u);
NodalField grad_bqce(const CoupledModel& m, const NodalField& u);
double energy_grad_bqce(const CoupledModel& m, const NodalField& u, NodalField& grad);

// Blended force field at the free nodes (entries are forces, not gradients).
NodalField forces_bqcf(const CoupledModel& m, const NodalField& u);

// g := grad_bqce(0) + forces_bqcf(0); cached on the model.
const NodalField& dead_load(CoupledModel& m);

double energy_bgfc(const CoupledModel& m, const NodalField& u);
NodalField grad_bgfc(const CoupledModel& m, const NodalField& u);
double energy_grad_bgfc(const CoupledModel& m, const NodalField& u, NodalField& grad);

// Renormalized form (site energies and density expanded to second order
// about the predictor); agrees with the dead-load form on defect-free
// problems and is kept for cross-validation.
double energy_bgfc_renorm(const CoupledModel& m, const NodalField& u);

// Pure Cauchy-Born nodal gradient of the quadrature functional (no blending);
// the continuum side of the BQCF force blend.
NodalField grad_cauchy_born(const CoupledModel& m, const NodalField& u);

// Free-DOF packing.
VecX pack_nodal(const CoupledModel& m, const NodalField& u);
NodalField unpack_nodal(const CoupledModel& m, const VecX& x);

// Solves the model: energy minimization for BQCE/BGFC, force balance for
// BQCF.  Returns the nodal field and solver diagnostics.
struct CoupledSolve {
    NodalField u;
    SolveResult stats;
    double energy = 0.0;  // BQCE energy for BQCF models
};

CoupledSolve solve_coupled(CoupledModel& m, const SolverConfig& cfg);

}  // namespace ac

#endif
