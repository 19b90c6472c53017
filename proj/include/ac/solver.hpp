#ifndef AC_SOLVER_HPP
#define AC_SOLVER_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

// Gradient-only solvers for the lattice models: limited-memory quasi-Newton
// minimization for energy functionals, and a Newton-Krylov residual solver
// (finite-difference directional derivatives) for non-conservative forces.

namespace ac {

using VecX = std::vector<double>;

// Fused energy+gradient callable: returns E(x) and fills grad (same size as x).
using EnergyGrad = std::function<double(const VecX&, VecX&)>;

// Residual callable: fills F(x).
using ForceFn = std::function<void(const VecX&, VecX&)>;

struct SolverConfig {
    double grad_tol = 1e-8;  // infinity norm of gradient / residual
    int max_iter = 10000;
    int history = 10;        // L-BFGS memory
    bool verbose = false;
    std::ostream* log = nullptr;  // iteration CSV stream when verbose
};

struct SolveResult {
    VecX u;
    double energy = 0.0;  // unset for force_balance
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

double inf_norm(const VecX& v);

// L-BFGS with backtracking sufficient-decrease line search.  Monotone in
// energy; stops at grad_tol (infinity norm) or max_iter.
SolveResult minimize(const EnergyGrad& fg, VecX u0, const SolverConfig& cfg);

// Solves F(u) = 0 by inexact Newton with GMRES inner iterations; the action
// of the Jacobian is approximated by finite differences of F.
SolveResult force_balance(const ForceFn& force, VecX u0, const SolverConfig& cfg);

}  // namespace ac

#endif
