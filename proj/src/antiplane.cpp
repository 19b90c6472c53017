#include "ac/antiplane.hpp"

#include <cmath>
#include <stdexcept>

#include "ac/potential.hpp"

namespace ac {

namespace {

inline double phi_ap(double r) {
    const double s = std::sin(M_PI * r);
    return s * s;
}

inline double dphi_ap(double r) { return M_PI * std::sin(2.0 * M_PI * r); }

constexpr double kNN = 1.0;  // nearest-neighbor cutoff

}  // namespace

double ylin(const Vec2& a, const Vec2& core) {
    const Vec2 d = a - core;
    if (d.x == 0.0 && d.y == 0.0)
        throw std::invalid_argument("ylin: evaluation at the dislocation core");
    return std::atan2(d.y, d.x) / (2.0 * M_PI);
}

double reduce_mod1(double d) {
    double r = d - std::nearbyint(d);
    if (r <= -0.5) r += 1.0;
    return r;
}

void AntiplaneModel::set_free_radius(double r) {
    const Lattice& l = *lat;
    free_radius = r;
    is_free.assign(l.n_sites(), 0);
    free_sites.clear();
    active.clear();
    const Vec2 c = l.defect_center();
    const double r_act = r + kNN + 1e-9;
    for (int s = 0; s < l.n_sites(); ++s) {
        const double d = norm(l.positions[s] - c);
        if (d <= r) {
            is_free[s] = 1;
            free_sites.push_back(s);
        }
        if (d <= r_act) active.push_back(s);
    }
}

namespace {

void fill_predictor(const Lattice& lat, const NeighborTable& tab, const Vec2& core,
                    std::vector<double>& dlin, std::vector<double>& s_lin) {
    const int n = lat.n_sites();
    dlin.resize(tab.nbr.size());
    s_lin.assign(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const double ys = ylin(lat.positions[s], core);
        double acc = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const double d = reduce_mod1(ylin(lat.positions[b], core) - ys);
            dlin[k] = d;
            acc += phi_ap(d);
        }
        s_lin[s] = acc;
    }
}

}  // namespace

AntiplaneModel make_antiplane(const Lattice& lat, double free_radius, const Vec2& core) {
    if (!lat.removed.empty())
        throw std::invalid_argument("make_antiplane: lattice must be defect-free");
    AntiplaneModel m;
    m.lat = &lat;
    m.core = core;
    m.table = build_neighbor_table(lat, kNN);
    // the core must not sit on a lattice site
    for (int s = 0; s < lat.n_sites(); ++s)
        if (norm(lat.positions[s] - core) < 1e-9)
            throw std::invalid_argument("make_antiplane: core coincides with a lattice site");
    fill_predictor(lat, m.table, core, m.dlin, m.s_lin);
    m.set_free_radius(free_radius);
    return m;
}

AntiplaneModel make_antiplane(const Lattice& lat, double free_radius) {
    // barycenter of the lattice cell spanned by e1, e2 at the defect center
    const Vec2 c = lat.defect_center();
    const Vec2 core = c + (1.0 / 3.0) * (lat.basis * Vec2(1.0, 0.0) + lat.basis * Vec2(0.0, 1.0));
    return make_antiplane(lat, free_radius, core);
}

double site_energy_ap(const AntiplaneModel& m, const ScalarField& u, int site) {
    const auto& tab = m.table;
    double s = 0.0;
    for (std::int64_t k = tab.offsets[site]; k < tab.offsets[site + 1]; ++k)
        s += phi_ap(m.dlin[k] + u[tab.nbr[k]] - u[site]);
    const double s0 = m.s_lin[site];
    return 0.5 * (s * s - s0 * s0);  // G(s) - G(s0) with G(s) = 1 + s^2/2
}

double ap_energy_grad(const AntiplaneModel& m, const ScalarField& u, ScalarField& grad) {
    const auto& tab = m.table;
    const int na = static_cast<int>(m.active.size());
    std::vector<double> Gp(m.lat->n_sites(), 0.0);  // G'(s_a) = s_a
    std::vector<double> site_e(na);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < na; ++i) {
        const int s = m.active[i];
        double acc = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            acc += phi_ap(m.dlin[k] + u[tab.nbr[k]] - u[s]);
        Gp[s] = acc;
        const double s0 = m.s_lin[s];
        site_e[i] = 0.5 * (acc * acc - s0 * s0);
    }

    grad.assign(u.size(), 0.0);
    const int nf = static_cast<int>(m.free_sites.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nf; ++i) {
        const int s = m.free_sites[i];
        double acc = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            acc += (Gp[s] + Gp[b]) * dphi_ap(m.dlin[k] + u[b] - u[s]);
        }
        grad[s] = -acc;
    }

    double sum = 0.0, comp = 0.0;
    for (double e : site_e) {
        const double y = e - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

double ap_energy(const AntiplaneModel& m, const ScalarField& u) {
    ScalarField g;
    return ap_energy_grad(m, u, g);
}

ScalarField ap_solve_reference(const AntiplaneModel& m, double tol, int max_iter,
                               const ScalarField* initial) {
    ScalarField u(m.lat->n_sites(), 0.0);
    if (initial) u = *initial;
    ScalarField grad(u.size());

    auto fg = [&](const VecX& x, VecX& g) {
        for (size_t i = 0; i < m.free_sites.size(); ++i) u[m.free_sites[i]] = x[i];
        const double E = ap_energy_grad(m, u, grad);
        g.resize(x.size());
        for (size_t i = 0; i < m.free_sites.size(); ++i) g[i] = grad[m.free_sites[i]];
        return E;
    };

    VecX x0(m.free_sites.size(), 0.0);
    for (size_t i = 0; i < m.free_sites.size(); ++i) x0[i] = u[m.free_sites[i]];

    SolverConfig cfg;
    cfg.grad_tol = tol;
    cfg.max_iter = max_iter;
    auto res = minimize(fg, std::move(x0), cfg);
    if (!res.converged)
        throw std::runtime_error("ap_solve_reference: solver did not converge (" + res.message + ")");
    ScalarField out(m.lat->n_sites(), 0.0);
    for (size_t i = 0; i < m.free_sites.size(); ++i) out[m.free_sites[i]] = res.u[i];
    return out;
}

double ap_cb_density(const Vec2& g) {
    double s = 0.0;
    for (const auto& rho : homogeneous_stencil(kNN)) s += phi_ap(dot(g, rho));
    return (1.0 + 0.5 * s * s) / det(triangular_basis());
}

Vec2 ap_cb_stress(const Vec2& g) {
    double s = 0.0;
    Vec2 ds;
    for (const auto& rho : homogeneous_stencil(kNN)) {
        const double d = dot(g, rho);
        s += phi_ap(d);
        ds += dphi_ap(d) * rho;
    }
    return (s / det(triangular_basis())) * ds;  // G'(s) = s
}

ApCoupled make_ap_coupled(const AntiplaneModel& apm, const TriMesh& mesh, const Blend& blend) {
    if (mesh.lat != apm.lat)
        throw std::invalid_argument("make_ap_coupled: mesh built on a different lattice");
    ApCoupled m;
    m.apm = &apm;
    m.mesh = &mesh;
    m.blend = &blend;

    const Lattice& lat = *apm.lat;
    const auto& tab = apm.table;

    std::vector<std::uint8_t> in_ext(lat.n_sites(), 0);
    for (int s = 0; s < lat.n_sites(); ++s) {
        if (blend.atom_values[s] < 1.0) {
            m.atoms_blend.push_back(s);
            in_ext[s] = 1;
        }
    }
    for (int s : m.atoms_blend)
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) in_ext[tab.nbr[k]] = 1;
    for (int s = 0; s < lat.n_sites(); ++s)
        if (in_ext[s]) m.atoms_ext.push_back(s);

    for (int s : m.atoms_ext) {
        if (mesh.node_of_atom[s] < 0)
            throw std::runtime_error("make_ap_coupled: blended atom not resolved by the mesh");
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            if (mesh.node_of_atom[tab.nbr[k]] < 0)
                throw std::runtime_error("make_ap_coupled: atom stencil leaves the refined region");
    }

    m.dlin = apm.dlin;
    m.s_lin = apm.s_lin;

    m.beta_tri.resize(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tr = mesh.triangles[t];
        m.beta_tri[t] = (blend.nodal[tr[0]] + blend.nodal[tr[1]] + blend.nodal[tr[2]]) / 3.0;
    }
    for (int n = 0; n < mesh.n_nodes(); ++n)
        if (!mesh.clamped[n]) m.free_nodes.push_back(n);

    m.W0 = ap_cb_density(Vec2{0, 0});
    return m;
}

double ap_energy_grad_coupled(const ApCoupled& m, const ScalarField& u_nodal, ScalarField& grad) {
    const auto& tab = m.apm->table;
    const TriMesh& mesh = *m.mesh;
    const auto& beta = m.blend->atom_values;

    auto atom_u = [&](int s) { return u_nodal[mesh.node_of_atom[s]]; };

    grad.assign(mesh.n_nodes(), 0.0);

    // atomistic term over blended sites
    std::vector<double> Gp(m.apm->lat->n_sites(), 0.0);
    const int nb = static_cast<int>(m.atoms_blend.size());
    std::vector<double> site_e(nb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
        const int s = m.atoms_blend[i];
        double acc = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            acc += phi_ap(m.dlin[k] + atom_u(tab.nbr[k]) - atom_u(s));
        Gp[s] = acc;
        const double s0 = m.s_lin[s];
        site_e[i] = (1.0 - beta[s]) * 0.5 * (acc * acc - s0 * s0);
    }

    const int ne = static_cast<int>(m.atoms_ext.size());
    std::vector<double> ext_grad(ne);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ne; ++i) {
        const int c = m.atoms_ext[i];
        const double wc = beta[c] < 1.0 ? 1.0 - beta[c] : 0.0;
        double acc = 0.0;
        for (std::int64_t k = tab.offsets[c]; k < tab.offsets[c + 1]; ++k) {
            const int b = tab.nbr[k];
            const double wb = beta[b] < 1.0 ? 1.0 - beta[b] : 0.0;
            if (wc == 0.0 && wb == 0.0) continue;
            acc += (wc * Gp[c] + wb * Gp[b]) * dphi_ap(m.dlin[k] + atom_u(b) - atom_u(c));
        }
        ext_grad[i] = -acc;
    }
    for (int i = 0; i < ne; ++i) grad[mesh.node_of_atom[m.atoms_ext[i]]] += ext_grad[i];

    // continuum term
    const int nt = mesh.n_triangles();
    std::vector<double> tri_e(nt);
    std::vector<Vec2> tri_S(nt);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < nt; ++t) {
        const double w = m.beta_tri[t];
        if (w == 0.0) {
            tri_e[t] = 0.0;
            tri_S[t] = Vec2{};
            continue;
        }
        const Vec2 G = mesh.gradient_scalar(t, u_nodal);
        tri_e[t] = w * mesh.tri_area[t] * (ap_cb_density(G) - m.W0);
        tri_S[t] = (w * mesh.tri_area[t]) * ap_cb_stress(G);
    }
    for (int t = 0; t < nt; ++t) {
        if (m.beta_tri[t] == 0.0) continue;
        const Mat2& Ji = mesh.tri_jinv[t];
        const auto& tr = mesh.triangles[t];
        const double g1 = tri_S[t].x * Ji(0, 0) + tri_S[t].y * Ji(0, 1);
        const double g2 = tri_S[t].x * Ji(1, 0) + tri_S[t].y * Ji(1, 1);
        grad[tr[1]] += g1;
        grad[tr[2]] += g2;
        grad[tr[0]] -= g1 + g2;
    }

    for (int n = 0; n < mesh.n_nodes(); ++n)
        if (mesh.clamped[n]) grad[n] = 0.0;

    double sum = 0.0, comp = 0.0;
    for (double e : site_e) {
        const double y = e - comp;
        const double t2 = sum + y;
        comp = (t2 - sum) - y;
        sum = t2;
    }
    for (double e : tri_e) {
        const double y = e - comp;
        const double t2 = sum + y;
        comp = (t2 - sum) - y;
        sum = t2;
    }
    return sum;
}

ScalarField ap_dead_load(const ApCoupled& m) {
    // dPhi_a at zero bond differences: G'(sum phi(0)) phi'(0) = 0 exactly.
    const auto& tab = m.apm->table;
    ScalarField g(m.mesh->n_nodes(), 0.0);
    const double gp0 = 6.0 * phi_ap(0.0);  // G'(s)=s at the zero-bond state
    for (int s : m.atoms_blend) {
        const double w = 1.0 - m.blend->atom_values[s];
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const double contrib = w * gp0 * dphi_ap(0.0);
            g[m.mesh->node_of_atom[b]] += contrib;
            g[m.mesh->node_of_atom[s]] -= contrib;
        }
    }
    return g;
}

ApSolve ap_solve_coupled(const ApCoupled& m, const SolverConfig& cfg) {
    ApSolve out;
    ScalarField u(m.mesh->n_nodes(), 0.0), grad;

    auto fg = [&](const VecX& x, VecX& g) {
        for (size_t i = 0; i < m.free_nodes.size(); ++i) u[m.free_nodes[i]] = x[i];
        const double E = ap_energy_grad_coupled(m, u, grad);
        g.resize(x.size());
        for (size_t i = 0; i < m.free_nodes.size(); ++i) g[i] = grad[m.free_nodes[i]];
        return E;
    };
    out.stats = minimize(fg, VecX(m.free_nodes.size(), 0.0), cfg);
    out.u.assign(m.mesh->n_nodes(), 0.0);
    for (size_t i = 0; i < m.free_nodes.size(); ++i) out.u[m.free_nodes[i]] = out.stats.u[i];
    out.energy = out.stats.energy;
    return out;
}

}  // namespace ac
