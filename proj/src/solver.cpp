#include "ac/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace ac {

double inf_norm(const VecX& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

namespace {

double dot(const VecX& a, const VecX& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const VecX& x, VecX& y) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

SolveResult minimize(const EnergyGrad& fg, VecX u0, const SolverConfig& cfg) {
    if (cfg.grad_tol <= 0) throw std::invalid_argument("minimize: grad_tol must be positive");
    if (cfg.max_iter < 1) throw std::invalid_argument("minimize: max_iter must be >= 1");

    const size_t n = u0.size();
    SolveResult res;
    res.u = std::move(u0);

    VecX g(n), g_new(n), x_new(n), d(n);
    double f = fg(res.u, g);
    if (!std::isfinite(f)) throw std::runtime_error("minimize: non-finite energy at initial point");
    res.grad_norm = inf_norm(g);
    if (cfg.verbose && cfg.log) *cfg.log << "iter,energy,grad_inf,step\n0," << f << "," << res.grad_norm << ",0\n";
    if (res.grad_norm <= cfg.grad_tol) {
        res.energy = f;
        res.converged = true;
        return res;
    }

    // L-BFGS pairs, most recent at the back
    std::deque<VecX> S, Y;
    std::deque<double> rho;

    for (int it = 1; it <= cfg.max_iter; ++it) {
        // two-loop recursion: d = -H g
        d = g;
        std::vector<double> alpha(S.size());
        for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
            alpha[k] = rho[k] * dot(S[k], d);
            axpy(-alpha[k], Y[k], d);
        }
        if (!S.empty()) {
            const double gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
            for (auto& v : d) v *= gamma;
        }
        for (size_t k = 0; k < S.size(); ++k) {
            const double beta = rho[k] * dot(Y[k], d);
            axpy(alpha[k] - beta, S[k], d);
        }
        for (auto& v : d) v = -v;

        double gd = dot(g, d);
        if (gd >= 0.0) {  // not a descent direction: restart from steepest descent
            S.clear();
            Y.clear();
            rho.clear();
            for (size_t i = 0; i < n; ++i) d[i] = -g[i];
            gd = -dot(g, g);
        }

        double step = S.empty() ? std::min(1.0, 1.0 / res.grad_norm) : 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        bool ok = false;
        // sufficient decrease up to the evaluation noise floor; near the
        // minimizer energy differences drop below roundoff while the gradient
        // is still accurate, so pure Armijo would stall
        const double noise = 1e-13 * (1.0 + std::abs(f));
        for (int ls = 0; ls < 40; ++ls) {
            for (size_t i = 0; i < n; ++i) x_new[i] = res.u[i] + step * d[i];
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd + noise) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            res.energy = f;
            res.iterations = it;
            res.message = "line search failure";
            return res;
        }

        // curvature update
        VecX s(n), y(n);
        for (size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - res.u[i];
            y[i] = g_new[i] - g[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > cfg.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }

        res.u.swap(x_new);
        g.swap(g_new);
        f = f_new;
        res.grad_norm = inf_norm(g);
        res.iterations = it;
        if (cfg.verbose && cfg.log) *cfg.log << it << "," << f << "," << res.grad_norm << "," << step << "\n";
        if (res.grad_norm <= cfg.grad_tol) {
            res.converged = true;
            break;
        }
    }
    res.energy = f;
    if (!res.converged && res.message.empty()) res.message = "iteration cap reached";
    return res;
}

namespace {

// GMRES for J d = rhs with J v approximated by finite differences of F at u.
// Returns the approximate solution; no preconditioner.
VecX fd_gmres(const ForceFn& force, const VecX& u, const VecX& Fu, const VecX& rhs,
              int max_krylov, double rel_tol) {
    const size_t n = u.size();
    const double unorm = std::sqrt(dot(u, u));

    auto jvec = [&](const VecX& v, VecX& out) {
        const double vnorm = std::sqrt(dot(v, v));
        if (vnorm == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + unorm) / vnorm;
        VecX up(n);
        for (size_t i = 0; i < n; ++i) up[i] = u[i] + eps * v[i];
        force(up, out);
        for (size_t i = 0; i < n; ++i) out[i] = (out[i] - Fu[i]) / eps;
    };

    const double bnorm = std::sqrt(dot(rhs, rhs));
    if (bnorm == 0.0) return VecX(n, 0.0);

    std::vector<VecX> V;
    V.push_back(rhs);
    for (auto& x : V[0]) x /= bnorm;

    const int m = max_krylov;
    std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m, 0.0), sn(m, 0.0), beta(m + 1, 0.0);
    beta[0] = bnorm;

    int k = 0;
    VecX w(n);
    for (; k < m; ++k) {
        jvec(V[k], w);
        for (int i = 0; i <= k; ++i) {
            H[i][k] = dot(w, V[i]);
            axpy(-H[i][k], V[i], w);
        }
        H[k + 1][k] = std::sqrt(dot(w, w));
        if (H[k + 1][k] > 1e-14) {
            V.push_back(w);
            for (auto& x : V.back()) x /= H[k + 1][k];
        }
        // Givens rotations
        for (int i = 0; i < k; ++i) {
            const double t = cs[i] * H[i][k] + sn[i] * H[i + 1][k];
            H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
            H[i][k] = t;
        }
        const double denom = std::hypot(H[k][k], H[k + 1][k]);
        if (denom == 0.0) break;
        cs[k] = H[k][k] / denom;
        sn[k] = H[k + 1][k] / denom;
        H[k][k] = denom;
        H[k + 1][k] = 0.0;
        beta[k + 1] = -sn[k] * beta[k];
        beta[k] = cs[k] * beta[k];
        if (std::abs(beta[k + 1]) <= rel_tol * bnorm) {
            ++k;
            break;
        }
        if (static_cast<int>(V.size()) == k + 1) {  // breakdown: no new basis vector
            ++k;
            break;
        }
    }

    // back substitution
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
        double s = beta[i];
        for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
        y[i] = s / H[i][i];
    }
    VecX out(n, 0.0);
    for (int i = 0; i < k; ++i) axpy(y[i], V[i], out);
    return out;
}

}  // namespace

SolveResult force_balance(const ForceFn& force, VecX u0, const SolverConfig& cfg) {
    if (cfg.grad_tol <= 0) throw std::invalid_argument("force_balance: grad_tol must be positive");

    const size_t n = u0.size();
    SolveResult res;
    res.u = std::move(u0);

    VecX F(n), F_new(n), u_new(n);
    force(res.u, F);
    res.grad_norm = inf_norm(F);
    if (cfg.verbose && cfg.log) *cfg.log << "iter,residual_inf,step\n0," << res.grad_norm << ",0\n";
    if (res.grad_norm <= cfg.grad_tol) {
        res.converged = true;
        return res;
    }

    double best = res.grad_norm;
    int since_best = 0;
    const int patience = 8;

    for (int it = 1; it <= cfg.max_iter; ++it) {
        VecX rhs(n);
        for (size_t i = 0; i < n; ++i) rhs[i] = -F[i];
        // inexact Newton: modest inner tolerance, larger Krylov space late
        const double eta = std::min(0.1, std::sqrt(res.grad_norm / best) * 0.1 + 1e-4);
        VecX d = fd_gmres(force, res.u, F, rhs, 120, eta);

        double step = 1.0;
        bool ok = false;
        double new_norm = 0.0;
        for (int ls = 0; ls < 40; ++ls) {
            for (size_t i = 0; i < n; ++i) u_new[i] = res.u[i] + step * d[i];
            force(u_new, F_new);
            new_norm = inf_norm(F_new);
            if (std::isfinite(new_norm) && new_norm <= (1.0 - 1e-4 * step) * res.grad_norm) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            res.iterations = it;
            res.message = "line search failure on residual";
            return res;
        }

        res.u.swap(u_new);
        F.swap(F_new);
        res.grad_norm = new_norm;
        res.iterations = it;
        if (cfg.verbose && cfg.log) *cfg.log << it << "," << res.grad_norm << "," << step << "\n";

        if (res.grad_norm <= cfg.grad_tol) {
            res.converged = true;
            break;
        }
        if (res.grad_norm < 0.9 * best) {
            best = res.grad_norm;
            since_best = 0;
        } else if (++since_best >= patience) {
            res.message = "stagnation: residual no longer decreasing";
            return res;
        }
    }
    if (!res.converged && res.message.empty()) res.message = "iteration cap reached";
    return res;
}

}  // namespace ac
