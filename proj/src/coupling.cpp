#include "ac/coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace ac {

const char* method_name(Method m) {
    switch (m) {
        case Method::ATM: return "ATM";
        case Method::BQCE: return "BQCE";
        case Method::BQCF: return "BQCF";
        case Method::BGFC: return "BGFC";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "ATM") return Method::ATM;
    if (name == "BQCE") return Method::BQCE;
    if (name == "BQCF") return Method::BQCF;
    if (name == "BGFC") return Method::BGFC;
    throw std::invalid_argument("unknown method: " + name);
}

namespace {

// site displacement of an atom that is a mesh node
inline Vec2 atom_u(const CoupledModel& m, const NodalField& u, int site) {
    return u[m.mesh->node_of_atom[site]];
}

// stable site-energy difference Phi_a(Bx+u) - Phi_a(Bx); optionally F'(rho)
double site_diff(const CoupledModel& m, const NodalField& u, int s, double* dF_out) {
    const auto& tab = m.sys->table;
    const EamParams& p = m.sys->pot;
    const Vec2 us = atom_u(m, u, s);
    double dpair = 0.0, drho = 0.0;
    for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
        const int b = tab.nbr[k];
        const int d = tab.dir[k];
        const Vec2 du = atom_u(m, u, b) - us;
        const Vec2 g0 = m.bond_g0[d];
        const double r0 = m.bond_r0[d];
        const double h = 2.0 * dot(g0, du) + norm2(du);
        const double r1 = std::sqrt(r0 * r0 + h);
        if (!(r1 > 0.0)) throw std::runtime_error("coupling: bond collapse");
        const double dr = h / (r1 + r0);
        const double e0 = m.bond_e0[d];
        const double em = std::expm1(-p.a * dr);
        const double e1 = e0 * (1.0 + em);
        dpair += e0 * em * (e1 + e0 - 2.0);
        drho += m.bond_psi0[d] * std::expm1(-p.b * dr);
    }
    if (dF_out) {
        const double q1 = m.baseline_rho[s] + drho - p.rho0;
        *dF_out = p.c * (2.0 * q1 + 4.0 * q1 * q1 * q1);
    }
    return dpair + embed_diff(m.baseline_rho[s], drho, p);
}

double kahan_sum(const std::vector<double>& xs) {
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

CoupledModel make_model(Method kind, const AtomisticSystem& sys, const TriMesh& mesh,
                        const Blend& blend, const Mat2& B) {
    if (kind == Method::ATM)
        throw std::invalid_argument("make_model: the pure atomistic scheme does not use a mesh");
    if (mesh.lat != sys.lat)
        throw std::invalid_argument("make_model: mesh and system use different lattices");
    if (det(B) <= 0.0) throw std::invalid_argument("make_model: det B must be positive");

    CoupledModel m;
    m.kind = kind;
    m.sys = &sys;
    m.mesh = &mesh;
    m.blend = &blend;
    m.B = B;

    const Lattice& lat = *sys.lat;
    const int n = lat.n_sites();
    const EamParams& p = sys.pot;
    const auto& tab = sys.table;

    const size_t nd = tab.dirs.size();
    m.bond_g0.resize(nd);
    m.bond_r0.resize(nd);
    m.bond_e0.resize(nd);
    m.bond_psi0.resize(nd);
    for (size_t d = 0; d < nd; ++d) {
        const Vec2 g0 = B * (lat.basis * Vec2(static_cast<double>(tab.dirs[d].i),
                                              static_cast<double>(tab.dirs[d].j)));
        m.bond_g0[d] = g0;
        m.bond_r0[d] = norm(g0);
        m.bond_e0[d] = std::exp(-p.a * (m.bond_r0[d] - 1.0));
        m.bond_psi0[d] = std::exp(-p.b * m.bond_r0[d]);
    }
    m.baseline_rho.assign(n, 0.0);
    for (int s = 0; s < n; ++s) {
        double rho = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            rho += m.bond_psi0[tab.dir[k]];
        m.baseline_rho[s] = rho;
    }

    std::vector<std::uint8_t> in_ext(n, 0);
    for (int s = 0; s < n; ++s) {
        if (blend.atom_values[s] < 1.0) {
            m.atoms_blend.push_back(s);
            in_ext[s] = 1;
        }
    }
    for (int s : m.atoms_blend) {
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            in_ext[tab.nbr[k]] = 1;
    }
    for (int s = 0; s < n; ++s)
        if (in_ext[s]) m.atoms_ext.push_back(s);

    // every site the atomistic sum can see must be resolved by the mesh
    for (int s : m.atoms_ext) {
        if (mesh.node_of_atom[s] < 0)
            throw std::runtime_error("make_model: blended atom not resolved by the mesh");
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k)
            if (mesh.node_of_atom[tab.nbr[k]] < 0)
                throw std::runtime_error("make_model: atom stencil leaves the refined region");
    }

    m.beta_tri.resize(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tr = mesh.triangles[t];
        m.beta_tri[t] = (blend.nodal[tr[0]] + blend.nodal[tr[1]] + blend.nodal[tr[2]]) / 3.0;
    }

    for (int nn = 0; nn < mesh.n_nodes(); ++nn)
        if (!mesh.clamped[nn]) m.free_nodes.push_back(nn);

    const auto cb = cb_eval(B, sys.pot);
    m.W_B = cb.density;
    m.stress_B = cb.stress;

    if (kind == Method::BGFC) dead_load(m);
    return m;
}

namespace {

// densities and embedding derivatives for the given sites
void atom_densities(const CoupledModel& m, const NodalField& u,
                    const std::vector<std::int32_t>& sites, std::vector<double>& dF) {
    const auto& tab = m.sys->table;
    const EamParams& p = m.sys->pot;
    const int ns = static_cast<int>(sites.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ns; ++i) {
        const int s = sites[i];
        const Vec2 us = atom_u(m, u, s);
        double drho = 0.0;
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const int d = tab.dir[k];
            const Vec2 du = atom_u(m, u, b) - us;
            const Vec2 g0 = m.bond_g0[d];
            const double r0 = m.bond_r0[d];
            const double h = 2.0 * dot(g0, du) + norm2(du);
            const double r1 = std::sqrt(r0 * r0 + h);
            const double dr = h / (r1 + r0);
            drho += m.bond_psi0[d] * std::expm1(-p.b * dr);
        }
        const double q1 = m.baseline_rho[s] + drho - p.rho0;
        dF[s] = p.c * (2.0 * q1 + 4.0 * q1 * q1 * q1);
    }
}

// continuum quadrature: per-triangle energy density difference and stress
void continuum_pass(const CoupledModel& m, const NodalField& u, bool weighted,
                    std::vector<double>* tri_e, std::vector<Mat2>* tri_S) {
    const TriMesh& mesh = *m.mesh;
    const int nt = mesh.n_triangles();
#pragma omp parallel for schedule(static)
    for (int t = 0; t < nt; ++t) {
        const double w = weighted ? m.beta_tri[t] : 1.0;
        if (w == 0.0) {
            if (tri_e) (*tri_e)[t] = 0.0;
            if (tri_S) (*tri_S)[t] = Mat2();
            continue;
        }
        const Mat2 G = mesh.gradient(t, u);
        const auto cb = cb_diff_eval(m.B, G, m.sys->pot);
        if (tri_e) (*tri_e)[t] = w * mesh.tri_area[t] * cb.ddensity;
        if (tri_S) (*tri_S)[t] = (w * mesh.tri_area[t]) * cb.stress;
    }
}

void scatter_continuum(const CoupledModel& m, const std::vector<Mat2>& tri_S, NodalField& grad) {
    const TriMesh& mesh = *m.mesh;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Mat2& S = tri_S[t];
        if (S(0, 0) == 0 && S(0, 1) == 0 && S(1, 0) == 0 && S(1, 1) == 0) continue;
        const Mat2& Ji = mesh.tri_jinv[t];
        const auto& tr = mesh.triangles[t];
        const Vec2 g1 = S * Vec2(Ji(0, 0), Ji(0, 1));
        const Vec2 g2 = S * Vec2(Ji(1, 0), Ji(1, 1));
        grad[tr[1]] += g1;
        grad[tr[2]] += g2;
        grad[tr[0]] -= g1 + g2;
    }
}

}  // namespace

double energy_grad_bqce(const CoupledModel& m, const NodalField& u, NodalField& grad) {
    const auto& tab = m.sys->table;
    const EamParams& p = m.sys->pot;
    const auto& beta = m.blend->atom_values;

    grad.assign(m.mesh->n_nodes(), Vec2{});

    // atomistic part: densities and energies at blended atoms
    std::vector<double> dF(m.sys->lat->n_sites(), 0.0);
    const int nb = static_cast<int>(m.atoms_blend.size());
    std::vector<double> site_e(nb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
        const int s = m.atoms_blend[i];
        site_e[i] = (1.0 - beta[s]) * site_diff(m, u, s, &dF[s]);
    }

    const int ne = static_cast<int>(m.atoms_ext.size());
    std::vector<Vec2> ext_grad(ne);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ne; ++i) {
        const int c = m.atoms_ext[i];
        const double wc = beta[c] < 1.0 ? 1.0 - beta[c] : 0.0;
        const double dFc = dF[c];
        const Vec2 uc = atom_u(m, u, c);
        Vec2 acc;
        for (std::int64_t k = tab.offsets[c]; k < tab.offsets[c + 1]; ++k) {
            const int b = tab.nbr[k];
            const double wb = beta[b] < 1.0 ? 1.0 - beta[b] : 0.0;
            if (wc == 0.0 && wb == 0.0) continue;
            const int d = tab.dir[k];
            const Vec2 du = atom_u(m, u, b) - uc;
            const Vec2 g0 = m.bond_g0[d];
            const double r0 = m.bond_r0[d];
            const double h = 2.0 * dot(g0, du) + norm2(du);
            const double r1 = std::sqrt(r0 * r0 + h);
            const double dr = h / (r1 + r0);
            const double e1 = m.bond_e0[d] * (1.0 + std::expm1(-p.a * dr));
            const double psi1 = m.bond_psi0[d] * (1.0 + std::expm1(-p.b * dr));
            const double dphi = 2.0 * p.a * (e1 - e1 * e1);
            const double dpsi = -p.b * psi1;
            const double coef = wc * (dphi + dFc * dpsi) + wb * (dphi + dF[b] * dpsi);
            acc += (coef / r1) * (g0 + du);
        }
        ext_grad[i] = -acc;
    }
    for (int i = 0; i < ne; ++i) grad[m.mesh->node_of_atom[m.atoms_ext[i]]] += ext_grad[i];

    // continuum part
    std::vector<double> tri_e(m.mesh->n_triangles());
    std::vector<Mat2> tri_S(m.mesh->n_triangles());
    continuum_pass(m, u, true, &tri_e, &tri_S);
    scatter_continuum(m, tri_S, grad);

    for (int n = 0; n < m.mesh->n_nodes(); ++n)
        if (m.mesh->clamped[n]) grad[n] = Vec2{};

    return kahan_sum(site_e) + kahan_sum(tri_e);
}

double energy_bqce(const CoupledModel& m, const NodalField& u) {
    const auto& beta = m.blend->atom_values;
    const int nb = static_cast<int>(m.atoms_blend.size());
    std::vector<double> site_e(nb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
        const int s = m.atoms_blend[i];
        site_e[i] = (1.0 - beta[s]) * site_diff(m, u, s, nullptr);
    }
    std::vector<double> tri_e(m.mesh->n_triangles());
    continuum_pass(m, u, true, &tri_e, nullptr);
    return kahan_sum(site_e) + kahan_sum(tri_e);
}

NodalField grad_bqce(const CoupledModel& m, const NodalField& u) {
    NodalField g;
    energy_grad_bqce(m, u, g);
    return g;
}

NodalField grad_cauchy_born(const CoupledModel& m, const NodalField& u) {
    NodalField grad(m.mesh->n_nodes());
    std::vector<Mat2> tri_S(m.mesh->n_triangles());
    continuum_pass(m, u, false, nullptr, &tri_S);
    scatter_continuum(m, tri_S, grad);
    for (int n = 0; n < m.mesh->n_nodes(); ++n)
        if (m.mesh->clamped[n]) grad[n] = Vec2{};
    return grad;
}

NodalField forces_bqcf(const CoupledModel& m, const NodalField& u) {
    const auto& tab = m.sys->table;
    const EamParams& p = m.sys->pot;

    // continuum side: pure Cauchy-Born force (negative unblended gradient)
    NodalField f_cb = grad_cauchy_born(m, u);
    for (auto& v : f_cb) v = -v;

    // atomistic side at blended atoms; densities needed on the full collar
    std::vector<double> dF(m.sys->lat->n_sites(), 0.0);
    atom_densities(m, u, m.atoms_ext, dF);

    NodalField out(m.mesh->n_nodes());
    const int nb = static_cast<int>(m.atoms_blend.size());
    std::vector<Vec2> f_atm(nb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
        const int c = m.atoms_blend[i];
        const double dFc = dF[c];
        const Vec2 uc = atom_u(m, u, c);
        Vec2 acc;
        for (std::int64_t k = tab.offsets[c]; k < tab.offsets[c + 1]; ++k) {
            const int b = tab.nbr[k];
            const int d = tab.dir[k];
            const Vec2 du = atom_u(m, u, b) - uc;
            const Vec2 g0 = m.bond_g0[d];
            const double r0 = m.bond_r0[d];
            const double h = 2.0 * dot(g0, du) + norm2(du);
            const double r1 = std::sqrt(r0 * r0 + h);
            const double dr = h / (r1 + r0);
            const double e1 = m.bond_e0[d] * (1.0 + std::expm1(-p.a * dr));
            const double psi1 = m.bond_psi0[d] * (1.0 + std::expm1(-p.b * dr));
            const double dphi = 2.0 * p.a * (e1 - e1 * e1);
            const double dpsi = -p.b * psi1;
            acc += ((2.0 * dphi + (dFc + dF[b]) * dpsi) / r1) * (g0 + du);
        }
        f_atm[i] = acc;  // force = -gradient; the gradient is -acc
    }

    for (int n : m.free_nodes) out[n] = m.blend->nodal[n] * f_cb[n];
    for (int i = 0; i < nb; ++i) {
        const int c = m.atoms_blend[i];
        const int n = m.mesh->node_of_atom[c];
        if (m.mesh->clamped[n]) continue;
        const double bn = m.blend->nodal[n];
        out[n] = (1.0 - bn) * f_atm[i] + bn * f_cb[n];
    }
    return out;
}

const NodalField& dead_load(CoupledModel& m) {
    if (!m.dead) {
        const NodalField zero(m.mesh->n_nodes());
        NodalField g = grad_bqce(m, zero);
        const NodalField f = forces_bqcf(m, zero);
        for (size_t i = 0; i < g.size(); ++i) g[i] += f[i];
        m.dead = std::move(g);
    }
    return *m.dead;
}

double energy_bgfc(const CoupledModel& m, const NodalField& u) {
    if (!m.dead) throw std::logic_error("energy_bgfc: dead load not assembled");
    double corr = 0.0;
    for (size_t i = 0; i < u.size(); ++i) corr += dot((*m.dead)[i], u[i]);
    return energy_bqce(m, u) - corr;
}

NodalField grad_bgfc(const CoupledModel& m, const NodalField& u) {
    if (!m.dead) throw std::logic_error("grad_bgfc: dead load not assembled");
    NodalField g = grad_bqce(m, u);
    for (size_t i = 0; i < g.size(); ++i) g[i] -= (*m.dead)[i];
    for (int n = 0; n < m.mesh->n_nodes(); ++n)
        if (m.mesh->clamped[n]) g[n] = Vec2{};
    return g;
}

double energy_grad_bgfc(const CoupledModel& m, const NodalField& u, NodalField& grad) {
    if (!m.dead) throw std::logic_error("energy_grad_bgfc: dead load not assembled");
    const double E = energy_grad_bqce(m, u, grad);
    double corr = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        corr += dot((*m.dead)[i], u[i]);
        grad[i] -= (*m.dead)[i];
    }
    for (int n = 0; n < m.mesh->n_nodes(); ++n)
        if (m.mesh->clamped[n]) grad[n] = Vec2{};
    return E - corr;
}

double energy_bgfc_renorm(const CoupledModel& m, const NodalField& u) {
    const auto& tab = m.sys->table;
    const EamParams& p = m.sys->pot;
    const auto& beta = m.blend->atom_values;

    // site energies expanded about the predictor: Phi(Bx+u)-Phi(Bx)-<dPhi(Bx),u>
    const int nb = static_cast<int>(m.atoms_blend.size());
    std::vector<double> site_e(nb);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
        const int s = m.atoms_blend[i];
        const double dF0 = embed(m.baseline_rho[s], p).dF;
        double lin = 0.0;
        const Vec2 us = atom_u(m, u, s);
        for (std::int64_t k = tab.offsets[s]; k < tab.offsets[s + 1]; ++k) {
            const int b = tab.nbr[k];
            const int d = tab.dir[k];
            const double r0 = m.bond_r0[d];
            const double e0 = m.bond_e0[d];
            const double dphi0 = 2.0 * p.a * (e0 - e0 * e0);
            const double dpsi0 = -p.b * m.bond_psi0[d];
            const Vec2 du = atom_u(m, u, b) - us;
            lin += (dphi0 + dF0 * dpsi0) / r0 * dot(m.bond_g0[d], du);
        }
        site_e[i] = (1.0 - beta[s]) * (site_diff(m, u, s, nullptr) - lin);
    }

    // continuum: W''(G) = W(B+G) - W(B) - dW(B):G
    std::vector<double> tri_e(m.mesh->n_triangles());
    const TriMesh& mesh = *m.mesh;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double w = m.beta_tri[t];
        if (w == 0.0) {
            tri_e[t] = 0.0;
            continue;
        }
        const Mat2 G = mesh.gradient(t, u);
        const auto cb = cb_diff_eval(m.B, G, p);
        tri_e[t] = w * mesh.tri_area[t] * (cb.ddensity - ddot(m.stress_B, G));
    }
    return kahan_sum(site_e) + kahan_sum(tri_e);
}

VecX pack_nodal(const CoupledModel& m, const NodalField& u) {
    VecX x(2 * m.free_nodes.size());
    for (size_t i = 0; i < m.free_nodes.size(); ++i) {
        x[2 * i] = u[m.free_nodes[i]].x;
        x[2 * i + 1] = u[m.free_nodes[i]].y;
    }
    return x;
}

NodalField unpack_nodal(const CoupledModel& m, const VecX& x) {
    NodalField u(m.mesh->n_nodes());
    for (size_t i = 0; i < m.free_nodes.size(); ++i)
        u[m.free_nodes[i]] = {x[2 * i], x[2 * i + 1]};
    return u;
}

CoupledSolve solve_coupled(CoupledModel& m, const SolverConfig& cfg) {
    CoupledSolve out;
    NodalField u(m.mesh->n_nodes()), grad(m.mesh->n_nodes());

    auto unpack_into = [&](const VecX& x) {
        for (size_t i = 0; i < m.free_nodes.size(); ++i)
            u[m.free_nodes[i]] = {x[2 * i], x[2 * i + 1]};
    };
    auto pack_grad = [&](VecX& g) {
        g.resize(2 * m.free_nodes.size());
        for (size_t i = 0; i < m.free_nodes.size(); ++i) {
            g[2 * i] = grad[m.free_nodes[i]].x;
            g[2 * i + 1] = grad[m.free_nodes[i]].y;
        }
    };

    const VecX x0(2 * m.free_nodes.size(), 0.0);
    if (m.kind == Method::BQCE || m.kind == Method::BGFC) {
        auto fg = [&](const VecX& x, VecX& g) {
            unpack_into(x);
            const double E = (m.kind == Method::BGFC) ? energy_grad_bgfc(m, u, grad)
                                                      : energy_grad_bqce(m, u, grad);
            pack_grad(g);
            return E;
        };
        out.stats = minimize(fg, x0, cfg);
        out.u = unpack_nodal(m, out.stats.u);
        out.energy = (m.kind == Method::BGFC) ? energy_bgfc(m, out.u) : energy_bqce(m, out.u);
    } else if (m.kind == Method::BQCF) {
        auto ff = [&](const VecX& x, VecX& F) {
            unpack_into(x);
            grad = forces_bqcf(m, u);
            pack_grad(F);
        };
        out.stats = force_balance(ff, x0, cfg);
        out.u = unpack_nodal(m, out.stats.u);
        out.energy = energy_bqce(m, out.u);  // BQCF energies are evaluated with BQCE
    } else {
        throw std::invalid_argument("solve_coupled: unsupported method");
    }
    return out;
}

}  // namespace ac
