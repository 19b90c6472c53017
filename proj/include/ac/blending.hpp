#ifndef AC_BLENDING_HPP
#define AC_BLENDING_HPP

#include <vector>

#include "ac/femgrid.hpp"
#include "ac/geometry.hpp"
#include "ac/lattice.hpp"
#include "ac/solver.hpp"

// Blending field beta: 0 on the atomistic ball B_{R_a}, 1 outside B_{R_b},
// radial quintic baseline or the discrete-biharmonic optimized variant.
// Values are sampled at lattice sites (site-energy weights) and mesh nodes
// (quadrature weights) from the same underlying field.

namespace ac {

struct BlendNorms {
    double grad_inf = 0.0;
    double hess_inf = 0.0;
    double hess_l2 = 0.0;
};

struct Blend {
    double R_a = 0.0, R_b = 0.0;
    Vec2 center;
    bool optimized = false;

    std::vector<double> nodal;        // per mesh node
    std::vector<double> atom_values;  // per lattice site
    BlendNorms norms;

    // radial quintic profile (the baseline; exact field for !optimized)
    double profile(double r) const;
    double profile_d1(double r) const;
    double profile_d2(double r) const;

    std::string to_json() const;
};

// Quintic radial spline: B=0 below R_a, B=1 above R_b, B' = B'' = 0 at both.
Blend spline_beta(const TriMesh& mesh, double R_a, double R_b);

// Minimizes the discrete |hess beta|^2 over annulus sites subject to the
// support constraints; falls back to the spline when R_b - R_a < 3.
Blend optimize_beta(const TriMesh& mesh, double R_a, double R_b);

// Discrete norms: P1 gradients on mesh triangles, second differences of the
// 6-neighbor stencil at lattice sites (L2 weighted by the site volume).
BlendNorms beta_norms(const Blend& b, const TriMesh& mesh);

// Hessian reconstruction from the three independent nearest-neighbor second
// differences d_rho f = f(a+rho) - 2 f(a) + f(a-rho), rho in {e1, e2, e2-e1}.
Mat2 hessian_from_second_differences(double d_e1, double d_e2, double d_e21);

// Plain conjugate gradient on an SPD operator, used by optimize_beta.
VecX conjugate_gradient(const std::function<void(const VecX&, VecX&)>& apply, const VecX& rhs,
                        VecX x0, double rel_tol, int max_iter);

}  // namespace ac

#endif
