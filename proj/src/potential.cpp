#include "ac/potential.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace ac {

void EamParams::validate() const {
    if (a <= 0 || b <= 0 || c <= 0) throw std::invalid_argument("EamParams: a, b, c must be positive");
    if (r_cut <= 1.0) throw std::invalid_argument("EamParams: r_cut must exceed 1");
}

PairTerms pair_terms(double r, const EamParams& p) {
    if (r <= 0.0) throw std::invalid_argument("pair_terms: r must be positive");
    const double e = std::exp(-p.a * (r - 1.0));  // e^{-a(r-1)}
    const double e2 = e * e;
    PairTerms t;
    t.phi = e2 - 2.0 * e;
    t.dphi = -2.0 * p.a * e2 + 2.0 * p.a * e;
    t.psi = std::exp(-p.b * r);
    t.dpsi = -p.b * t.psi;
    return t;
}

EmbedTerms embed(double rho_tilde, const EamParams& p) {
    const double d = rho_tilde - p.rho0;
    const double d2 = d * d;
    return {p.c * (d2 + d2 * d2), p.c * (2.0 * d + 4.0 * d2 * d)};
}

double site_energy(const EamParams& p, const SiteState& s) {
    double pair = 0.0, rho = 0.0;
    for (const auto& g : s.bond_vectors) {
        const double r = norm(g);
        if (r <= 0.0) throw std::invalid_argument("site_energy: zero-length bond");
        const auto t = pair_terms(r, p);
        pair += t.phi;
        rho += t.psi;
    }
    return pair + embed(rho, p).F;
}

std::vector<Vec2> site_gradient(const EamParams& p, const SiteState& s) {
    double rho = 0.0;
    for (const auto& g : s.bond_vectors) {
        const double r = norm(g);
        if (r <= 0.0) throw std::invalid_argument("site_gradient: zero-length bond");
        rho += pair_terms(r, p).psi;
    }
    const double dF = embed(rho, p).dF;
    std::vector<Vec2> out;
    out.reserve(s.bond_vectors.size());
    for (const auto& g : s.bond_vectors) {
        const double r = norm(g);
        const auto t = pair_terms(r, p);
        out.push_back(((t.dphi + dF * t.dpsi) / r) * g);
    }
    return out;
}

const std::vector<Vec2>& homogeneous_stencil(double r_cut) {
    static std::mutex mtx;
    static std::map<double, std::vector<Vec2>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(r_cut);
    if (it == cache.end()) {
        const Mat2 A = triangular_basis();
        std::vector<Vec2> dirs;
        for (const auto& o : stencil_offsets(A, r_cut))
            dirs.push_back(A * Vec2(static_cast<double>(o.i), static_cast<double>(o.j)));
        it = cache.emplace(r_cut, std::move(dirs)).first;
    }
    return it->second;
}

CbEval cb_eval(const Mat2& F, const EamParams& p) {
    if (det(F) <= 0.0) throw std::invalid_argument("cb_eval: deformation gradient must have positive determinant");
    const auto& stencil = homogeneous_stencil(p.r_cut);
    const double vol = det(triangular_basis());

    double pair = 0.0, rho = 0.0;
    for (const auto& d : stencil) {
        const double r = norm(F * d);
        const auto t = pair_terms(r, p);
        pair += t.phi;
        rho += t.psi;
    }
    const auto em = embed(rho, p);

    Mat2 stress;
    for (const auto& d : stencil) {
        const Vec2 g = F * d;
        const double r = norm(g);
        const auto t = pair_terms(r, p);
        const double coef = (t.dphi + em.dF * t.dpsi) / r;
        stress += coef * outer(g, d);
    }
    return {(pair + em.F) / vol, (1.0 / vol) * stress};
}

PairDiff pair_diff(double r0, double dr, const EamParams& p) {
    const double e0 = std::exp(-p.a * (r0 - 1.0));
    const double em = std::expm1(-p.a * dr);  // e1 = e0 (1 + em)
    const double e1 = e0 * (1.0 + em);
    PairDiff d;
    d.dphi = e0 * em * (e1 + e0 - 2.0);  // (e1^2 - 2 e1) - (e0^2 - 2 e0)
    d.dpsi = std::exp(-p.b * r0) * std::expm1(-p.b * dr);
    return d;
}

double embed_diff(double rho0, double drho, const EamParams& p) {
    const double q0 = rho0 - p.rho0;
    const double q1 = q0 + drho;
    // c [ (q1^2 - q0^2) + (q1^4 - q0^4) ]
    return p.c * drho * (q1 + q0) * (1.0 + q1 * q1 + q0 * q0);
}

CbDiff cb_diff_eval(const Mat2& B, const Mat2& G, const EamParams& p) {
    const auto& stencil = homogeneous_stencil(p.r_cut);
    const double vol = det(triangular_basis());

    double dpair = 0.0, rho0 = 0.0, drho = 0.0;
    for (const auto& d : stencil) {
        const Vec2 g0 = B * d;
        const Vec2 dg = G * d;
        const double r0 = norm(g0);
        const double r1sq = norm2(g0) + 2.0 * dot(g0, dg) + norm2(dg);
        const double r1 = std::sqrt(r1sq);
        const double dr = (2.0 * dot(g0, dg) + norm2(dg)) / (r1 + r0);
        const auto pd = pair_diff(r0, dr, p);
        dpair += pd.dphi;
        drho += pd.dpsi;
        rho0 += std::exp(-p.b * r0);
    }
    CbDiff out;
    out.ddensity = (dpair + embed_diff(rho0, drho, p)) / vol;

    const double dF = embed(rho0 + drho, p).dF;
    Mat2 stress;
    for (const auto& d : stencil) {
        const Vec2 g = (B + G) * d;
        const double r = norm(g);
        const auto t = pair_terms(r, p);
        stress += ((t.dphi + dF * t.dpsi) / r) * outer(g, d);
    }
    out.stress = (1.0 / vol) * stress;
    return out;
}

double equilibrium_scale(const EamParams& p) {
    // dW/dt along t -> W(tI) is tr(stress(tI)); bisect its sign change.
    auto deriv = [&](double t) {
        const Mat2 s = cb_eval(Mat2::scale(t), p).stress;
        return s(0, 0) + s(1, 1);
    };
    double lo = 0.9, hi = 1.1;
    double flo = deriv(lo), fhi = deriv(hi);
    if (!(flo < 0.0 && fhi > 0.0))
        throw std::runtime_error("equilibrium_scale: no interior minimum in [0.9, 1.1]");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = deriv(mid);
        if (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace ac
