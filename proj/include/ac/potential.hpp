#ifndef AC_POTENTIAL_HPP
#define AC_POTENTIAL_HPP

#include <vector>

#include "ac/geometry.hpp"
#include "ac/lattice.hpp"

// EAM toy potential
//
//   Phi = sum_rho phi(|g_rho|) + F( sum_rho psi(|g_rho|) )
//   phi(r) = e^{-2a(r-1)} - 2 e^{-a(r-1)}     (Morse pair term)
//   psi(r) = e^{-b r}                          (electron density)
//   F(t)   = c [ (t - t0)^2 + (t - t0)^4 ]     (embedding)
//
// and the derived Cauchy-Born strain energy density of the defect-free
// triangular lattice.  The interaction stencil is fixed in the reference
// configuration (bonds selected by reference distance, not deformed length).

namespace ac {

struct EamParams {
    double a = 4.4;
    double b = 3.0;
    double c = 5.0;
    double rho0 = 6.0 * std::exp(-3.0);
    double r_cut = 2.0;

    void validate() const;
};

struct PairTerms {
    double phi, dphi, psi, dpsi;
};

// phi, phi', psi, psi' at bond length r > 0.
PairTerms pair_terms(double r, const EamParams& p);

struct EmbedTerms {
    double F, dF;
};

EmbedTerms embed(double rho_tilde, const EamParams& p);

// Deformed bond vectors of one site over its reference stencil.
struct SiteState {
    std::vector<Vec2> bond_vectors;
};

double site_energy(const EamParams& p, const SiteState& s);

// dPhi/d(bond_rho), one 2-vector per bond.
std::vector<Vec2> site_gradient(const EamParams& p, const SiteState& s);

struct CbEval {
    double density;  // W(F), energy per unit volume
    Mat2 stress;     // dW/dF
};

// Cauchy-Born density and first Piola stress for the homogeneous triangular
// lattice: W(F) = Phi_0({F rho}) / det(basis) over the defect-free stencil.
CbEval cb_eval(const Mat2& F, const EamParams& p);

struct CbDiff {
    double ddensity;  // W(B+G) - W(B), evaluated without cancellation
    Mat2 stress;      // dW(B+G)
};

// Density difference and stress at B+G.  The difference is assembled from
// per-bond increments (expm1 of the stable bond-length change), so it stays
// accurate when |G| is small relative to the absolute energy scale.
CbDiff cb_diff_eval(const Mat2& B, const Mat2& G, const EamParams& p);

// phi(r1)-phi(r0) and psi(r1)-psi(r0) from r0 and the exact change dr.
struct PairDiff {
    double dphi, dpsi;
};
PairDiff pair_diff(double r0, double dr, const EamParams& p);

// F(rho0 + drho) - F(rho0), factored to avoid cancellation.
double embed_diff(double rho0, double drho, const EamParams& p);

// Scale t* minimizing t -> W(t I); the equilibrium lattice parameter.
double equilibrium_scale(const EamParams& p);

// Reference stencil directions of the defect-free lattice (cached per r_cut).
const std::vector<Vec2>& homogeneous_stencil(double r_cut);

}  // namespace ac

#endif
