#include "ac/atomistic.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace ac {

std::string displacement_to_json(const Displacement& u) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : u) j.push_back({v.x, v.y});
    return j.dump();
}

Displacement displacement_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Displacement u;
    u.reserve(j.size());
    for (const auto& e : j) u.push_back({e[0], e[1]});
    return u;
}

AtomisticSystem make_system(const Lattice& lat, const EamParams& pot) {
    pot.validate();
    AtomisticSystem sys;
    sys.lat = &lat;
    sys.pot = pot;
    sys.table = build_neighbor_table(lat, pot.r_cut);
    return sys;
}

void LoadedProblem::set_free_radius(double r) {
    const Lattice& lat = *sys->lat;
    const int n = lat.n_sites();
    free_radius = r;
    is_free.assign(n, 0);
    free_sites.clear();
    active.clear();
    const double r_act = r + sys->pot.r_cut + 1e-9;
    for (int s = 0; s < n; ++s) {
        const double d = norm(lat.positions[s] - center);
        if (d <= r) {
            is_free[s] = 1;
            free_sites.push_back(s);
        }
        if (d <= r_act) active.push_back(s);
    }
}

LoadedProblem make_loaded_problem(const AtomisticSystem& sys, const Mat2& B, double free_radius) {
    if (det(B) <= 0.0) throw std::invalid_argument("make_loaded_problem: det B must be positive");
    LoadedProblem prob;
    prob.sys = &sys;
    prob.B = B;
    prob.center = sys.lat->defect_center();

    const int n = sys.lat->n_sites();
    const EamParams& p = sys.pot;
    const auto& tab = sys.table;

    // per-direction reference bond data under the predictor B x
    const size_t nd = tab.dirs.size();
    prob.bond_g0.resize(nd);
    prob.bond_r0.resize(nd);
    prob.bond_e0.resize(nd);
    prob.bond_psi0.resize(nd);
    for (size_t d = 0; d < nd; ++d) {
        const Vec2 g0 = B * (sys.lat->basis * Vec2(static_cast<double>(tab.dirs[d].i),
                                                   static_cast<double>(tab.dirs[d].j)));
        prob.bond_g0[d] = g0;
        const double r0 = norm(g0);
        if (!(r0 > 0.0)) throw std::invalid_argument("make_loaded_problem: degenerate predictor bond");
        prob.bond_r0[d] = r0;
        prob.bond_e0[d] = std::exp(-p.a * (r0 - 1.0));
        prob.bond_psi0[d] = std::exp(-p.b * r0);
    }

    prob.baseline_rho.resize(n);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        double rho = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            rho += prob.bond_psi0[tab.dir[k]];
        prob.baseline_rho[s] = rho;
    }

    prob.set_free_radius(free_radius);
    return prob;
}

namespace {

struct Scratch {
    std::vector<double> dF;      // F'(rho_a) at the current state
    std::vector<double> site_e;  // per-active-site energy difference
};

// pass A: per-site embedding density, F', and stable energy difference
void pass_density_energy(const LoadedProblem& prob, const Displacement& u, Scratch& scr,
                         bool want_energy) {
    const auto& tab = prob.sys->table;
    const EamParams& p = prob.sys->pot;
    const int na = static_cast<int>(prob.active.size());
    scr.dF.assign(prob.sys->lat->n_sites(), 0.0);
    if (want_energy) scr.site_e.assign(na, 0.0);

#pragma omp parallel for schedule(static)
    for (int ia = 0; ia < na; ++ia) {
        const int s = prob.active[ia];
        const Vec2 us = u[s];
        double dpair = 0.0, drho = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const int d = tab.dir[k];
            const Vec2 du = u[b] - us;
            const Vec2 g0 = prob.bond_g0[d];
            const double r0 = prob.bond_r0[d];
            const double h = 2.0 * dot(g0, du) + norm2(du);
            const double r1 = std::sqrt(r0 * r0 + h);
            if (!(r1 > 0.0)) throw std::runtime_error("atomistic: bond collapse");
            const double dr = h / (r1 + r0);
            const double e0 = prob.bond_e0[d];
            const double em = std::expm1(-p.a * dr);
            const double e1 = e0 * (1.0 + em);
            dpair += e0 * em * (e1 + e0 - 2.0);
            drho += prob.bond_psi0[d] * std::expm1(-p.b * dr);
        }
        const double q1 = prob.baseline_rho[s] + drho - p.rho0;
        scr.dF[s] = p.c * (2.0 * q1 + 4.0 * q1 * q1 * q1);
        if (want_energy)
            scr.site_e[ia] = dpair + embed_diff(prob.baseline_rho[s], drho, p);
    }
}

// pass B: gradient at free sites from own bonds and neighbor F' values
void pass_gradient(const LoadedProblem& prob, const Displacement& u, const Scratch& scr,
                   Displacement& grad) {
    const auto& tab = prob.sys->table;
    const EamParams& p = prob.sys->pot;
    const int nf = static_cast<int>(prob.free_sites.size());

#pragma omp parallel for schedule(static)
    for (int i = 0; i < nf; ++i) {
        const int s = prob.free_sites[i];
        const Vec2 us = u[s];
        const double dFs = scr.dF[s];
        Vec2 acc;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const int d = tab.dir[k];
            const Vec2 du = u[b] - us;
            const Vec2 g0 = prob.bond_g0[d];
            const double r0 = prob.bond_r0[d];
            const double h = 2.0 * dot(g0, du) + norm2(du);
            const double r1 = std::sqrt(r0 * r0 + h);
            const double dr = h / (r1 + r0);
            const double e1 = prob.bond_e0[d] * (1.0 + std::expm1(-p.a * dr));
            const double psi1 = prob.bond_psi0[d] * (1.0 + std::expm1(-p.b * dr));
            const double dphi = 2.0 * p.a * (e1 - e1 * e1);
            const double dpsi = -p.b * psi1;
            const double coef = (2.0 * dphi + (dFs + scr.dF[b]) * dpsi) / r1;
            acc += coef * (g0 + du);
        }
        grad[s] = -acc;
    }
}

double kahan(const std::vector<double>& xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

}  // namespace

double energy_grad_atm(const LoadedProblem& prob, const Displacement& u, Displacement& grad) {
    if (static_cast<int>(u.size()) != prob.sys->lat->n_sites())
        throw std::invalid_argument("energy_grad_atm: displacement size mismatch");
    static thread_local Scratch scr;
    pass_density_energy(prob, u, scr, true);
    grad.assign(u.size(), Vec2{});
    pass_gradient(prob, u, scr, grad);
    return kahan(scr.site_e);
}

double energy_atm(const LoadedProblem& prob, const Displacement& u) {
    if (static_cast<int>(u.size()) != prob.sys->lat->n_sites())
        throw std::invalid_argument("energy_atm: displacement size mismatch");
    static thread_local Scratch scr;
    pass_density_energy(prob, u, scr, true);
    return kahan(scr.site_e);
}

Displacement grad_atm(const LoadedProblem& prob, const Displacement& u) {
    Displacement grad;
    static thread_local Scratch scr;
    pass_density_energy(prob, u, scr, false);
    grad.assign(u.size(), Vec2{});
    pass_gradient(prob, u, scr, grad);
    return grad;
}

VecX pack_free(const LoadedProblem& prob, const Displacement& u) {
    VecX x(2 * prob.free_sites.size());
    for (size_t i = 0; i < prob.free_sites.size(); ++i) {
        x[2 * i] = u[prob.free_sites[i]].x;
        x[2 * i + 1] = u[prob.free_sites[i]].y;
    }
    return x;
}

Displacement unpack_free(const LoadedProblem& prob, const VecX& x) {
    Displacement u(prob.sys->lat->n_sites());
    for (size_t i = 0; i < prob.free_sites.size(); ++i) {
        u[prob.free_sites[i]] = {x[2 * i], x[2 * i + 1]};
    }
    return u;
}

Displacement solve_reference(const LoadedProblem& prob, double tol, int max_iter,
                             const Displacement* initial) {
    if (tol <= 0.0) throw std::invalid_argument("solve_reference: tol must be positive");

    Displacement u(prob.sys->lat->n_sites());
    if (initial) u = *initial;
    Displacement grad(u.size());

    auto fg = [&](const VecX& x, VecX& g) {
        for (size_t i = 0; i < prob.free_sites.size(); ++i) {
            u[prob.free_sites[i]] = {x[2 * i], x[2 * i + 1]};
        }
        const double E = energy_grad_atm(prob, u, grad);
        g.resize(x.size());
        for (size_t i = 0; i < prob.free_sites.size(); ++i) {
            g[2 * i] = grad[prob.free_sites[i]].x;
            g[2 * i + 1] = grad[prob.free_sites[i]].y;
        }
        return E;
    };

    SolverConfig cfg;
    cfg.grad_tol = tol;
    cfg.max_iter = max_iter;
    cfg.history = 10;
    auto res = minimize(fg, pack_free(prob, initial ? *initial : u), cfg);
    if (!res.converged)
        throw std::runtime_error("solve_reference: solver did not converge (" + res.message + ")");
    return unpack_free(prob, res.u);
}

}  // namespace ac
