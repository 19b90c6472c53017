#include "ac/blending.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace ac {

namespace {

double quintic(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
double quintic_d1(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }
double quintic_d2(double s) { return 60.0 * s * (1.0 + s * (-3.0 + 2.0 * s)); }

}  // namespace

double Blend::profile(double r) const {
    if (r <= R_a) return 0.0;
    if (r >= R_b) return 1.0;
    return std::clamp(quintic((r - R_a) / (R_b - R_a)), 0.0, 1.0);
}

double Blend::profile_d1(double r) const {
    if (r <= R_a || r >= R_b) return 0.0;
    const double w = R_b - R_a;
    return quintic_d1((r - R_a) / w) / w;
}

double Blend::profile_d2(double r) const {
    if (r <= R_a || r >= R_b) return 0.0;
    const double w = R_b - R_a;
    return quintic_d2((r - R_a) / w) / (w * w);
}

Mat2 hessian_from_second_differences(double d_e1, double d_e2, double d_e21) {
    const double hxx = d_e1;
    const double hxy = (d_e2 - d_e21) / std::sqrt(3.0);
    const double hyy = (2.0 * (d_e2 + d_e21) - d_e1) / 3.0;
    return {hxx, hxy, hxy, hyy};
}

BlendNorms beta_norms(const Blend& b, const TriMesh& mesh) {
    const Lattice& lat = *mesh.lat;
    BlendNorms n;

    for (int t = 0; t < mesh.n_triangles(); ++t)
        n.grad_inf = std::max(n.grad_inf, norm(mesh.gradient_scalar(t, b.nodal)));

    const double v0 = std::abs(lat.det_basis);
    double sum = 0.0;
    for (int s = 0; s < lat.n_sites(); ++s) {
        const IntPt q = lat.coords[s];
        const int pe1 = lat.find({q.i + 1, q.j}), me1 = lat.find({q.i - 1, q.j});
        const int pe2 = lat.find({q.i, q.j + 1}), me2 = lat.find({q.i, q.j - 1});
        const int pd = lat.find({q.i - 1, q.j + 1}), md = lat.find({q.i + 1, q.j - 1});
        if (pe1 < 0 || me1 < 0 || pe2 < 0 || me2 < 0 || pd < 0 || md < 0) continue;
        const double f0 = b.atom_values[s];
        const Mat2 H = hessian_from_second_differences(
            b.atom_values[pe1] - 2 * f0 + b.atom_values[me1],
            b.atom_values[pe2] - 2 * f0 + b.atom_values[me2],
            b.atom_values[pd] - 2 * f0 + b.atom_values[md]);
        const double fr = frobenius(H);
        n.hess_inf = std::max(n.hess_inf, fr);
        sum += fr * fr * v0;
    }
    n.hess_l2 = std::sqrt(sum);
    return n;
}

Blend spline_beta(const TriMesh& mesh, double R_a, double R_b) {
    if (R_b <= R_a) throw std::invalid_argument("spline_beta: R_b must exceed R_a");
    const Lattice& lat = *mesh.lat;
    Blend b;
    b.R_a = R_a;
    b.R_b = R_b;
    b.center = lat.defect_center();
    b.atom_values.resize(lat.n_sites());
    for (int s = 0; s < lat.n_sites(); ++s)
        b.atom_values[s] = b.profile(norm(lat.positions[s] - b.center));
    b.nodal.resize(mesh.n_nodes());
    for (int n = 0; n < mesh.n_nodes(); ++n)
        b.nodal[n] = b.profile(norm(mesh.nodes[n] - b.center));
    b.norms = beta_norms(b, mesh);
    return b;
}

VecX conjugate_gradient(const std::function<void(const VecX&, VecX&)>& apply, const VecX& rhs,
                        VecX x0, double rel_tol, int max_iter) {
    const size_t n = rhs.size();
    VecX x = std::move(x0), r(n), q(n);
    apply(x, q);
    for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    VecX p = r;
    auto dot = [](const VecX& a, const VecX& b) {
        double s = 0;
        for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    double rr = dot(r, r);
    const double stop = rel_tol * rel_tol * std::max(dot(rhs, rhs), 1e-300);
    for (int it = 0; it < max_iter && rr > stop; ++it) {
        apply(p, q);
        const double pq = dot(p, q);
        if (pq <= 0) break;
        const double alpha = rr / pq;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        const double rr_new = dot(r, r);
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
        rr = rr_new;
    }
    return x;
}

Blend optimize_beta(const TriMesh& mesh, double R_a, double R_b) {
    if (R_b <= R_a) throw std::invalid_argument("optimize_beta: R_b must exceed R_a");
    if (R_b - R_a < 3.0) return spline_beta(mesh, R_a, R_b);  // annulus too thin

    const Lattice& lat = *mesh.lat;
    Blend b;
    b.R_a = R_a;
    b.R_b = R_b;
    b.center = lat.defect_center();
    b.optimized = true;

    // variables: annulus sites; everything else is pinned by the support rules
    std::vector<int> var_site;
    std::vector<int> var_of_site(lat.n_sites(), -1);
    std::vector<double> base(lat.n_sites());
    for (int s = 0; s < lat.n_sites(); ++s) {
        const double r = norm(lat.positions[s] - b.center);
        base[s] = (r <= R_a) ? 0.0 : (r >= R_b ? 1.0 : -1.0);
        if (base[s] < 0.0) {
            var_of_site[s] = static_cast<int>(var_site.size());
            var_site.push_back(s);
        }
    }

    // evaluation sites: full 6-neighbor stencil near the annulus
    struct EvalSite {
        int s, pe1, me1, pe2, me2, pd, md;
    };
    std::vector<EvalSite> evals;
    for (int s = 0; s < lat.n_sites(); ++s) {
        const double r = norm(lat.positions[s] - b.center);
        if (r <= R_a - 2.0 || r >= R_b + 2.0) continue;
        const IntPt q = lat.coords[s];
        EvalSite e{s,
                   lat.find({q.i + 1, q.j}),
                   lat.find({q.i - 1, q.j}),
                   lat.find({q.i, q.j + 1}),
                   lat.find({q.i, q.j - 1}),
                   lat.find({q.i - 1, q.j + 1}),
                   lat.find({q.i + 1, q.j - 1})};
        if (e.pe1 < 0 || e.me1 < 0 || e.pe2 < 0 || e.me2 < 0 || e.pd < 0 || e.md < 0) continue;
        evals.push_back(e);
    }

    auto field_at = [&](const VecX& v, int s) {
        return var_of_site[s] >= 0 ? v[var_of_site[s]] : base[s];
    };

    // gradient of sum_a |H(a)|_F^2 with respect to the variable values
    auto objective_grad = [&](const VecX& v, VecX& g) {
        g.assign(v.size(), 0.0);
        for (const auto& e : evals) {
            const double f0 = field_at(v, e.s);
            const double d0 = field_at(v, e.pe1) - 2 * f0 + field_at(v, e.me1);
            const double d1 = field_at(v, e.pe2) - 2 * f0 + field_at(v, e.me2);
            const double d2 = field_at(v, e.pd) - 2 * f0 + field_at(v, e.md);
            const double hxx = d0;
            const double hxy = (d1 - d2) / std::sqrt(3.0);
            const double hyy = (2.0 * (d1 + d2) - d0) / 3.0;
            // chain rule back to the three second differences
            const double gd0 = 2.0 * (hxx - hyy / 3.0);
            const double gd1 = 2.0 * (2.0 * hxy / std::sqrt(3.0) + 2.0 * hyy / 3.0);
            const double gd2 = 2.0 * (-2.0 * hxy / std::sqrt(3.0) + 2.0 * hyy / 3.0);
            auto add = [&](int site, double w) {
                const int k = var_of_site[site];
                if (k >= 0) g[k] += w;
            };
            add(e.s, -2.0 * (gd0 + gd1 + gd2));
            add(e.pe1, gd0);
            add(e.me1, gd0);
            add(e.pe2, gd1);
            add(e.me2, gd1);
            add(e.pd, gd2);
            add(e.md, gd2);
        }
    };

    // normal equations A v = rhs, matrix-free via the objective gradient
    VecX zero(var_site.size(), 0.0), g0;
    objective_grad(zero, g0);
    VecX rhs(var_site.size());
    for (size_t i = 0; i < rhs.size(); ++i) rhs[i] = -0.5 * g0[i];
    auto apply = [&](const VecX& v, VecX& out) {
        objective_grad(v, out);
        for (size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (out[i] - g0[i]);
    };

    // start from the spline profile
    VecX v0(var_site.size());
    for (size_t i = 0; i < var_site.size(); ++i)
        v0[i] = b.profile(norm(lat.positions[var_site[i]] - b.center));
    VecX v = conjugate_gradient(apply, rhs, std::move(v0), 1e-12,
                                8 * static_cast<int>(var_site.size()) + 200);

    b.atom_values.resize(lat.n_sites());
    for (int s = 0; s < lat.n_sites(); ++s) b.atom_values[s] = field_at(v, s);
    b.nodal.resize(mesh.n_nodes());
    for (int n = 0; n < mesh.n_nodes(); ++n) {
        const int s = mesh.atom_of_node[n];
        b.nodal[n] = (s >= 0) ? b.atom_values[s] : b.profile(norm(mesh.nodes[n] - b.center));
    }
    b.norms = beta_norms(b, mesh);
    return b;
}

std::string Blend::to_json() const {
    nlohmann::json j;
    j["R_a"] = R_a;
    j["R_b"] = R_b;
    j["center"] = {center.x, center.y};
    j["optimized"] = optimized;
    j["nodal"] = nodal;
    j["atom_values"] = atom_values;
    j["norms"] = {{"grad_inf", norms.grad_inf}, {"hess_inf", norms.hess_inf}, {"hess_l2", norms.hess_l2}};
    return j.dump();
}

}  // namespace ac
