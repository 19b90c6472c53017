#include "ac/femgrid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace ac {

namespace {

constexpr double kNu = 1.1547005383792515;  // 2/sqrt(3), circumradius/inradius
constexpr double kInr = 0.8660254037844386; // sqrt(3)/2

// Corners of the elongated hexagon at gauge L around the defect row.
std::array<Vec2, 6> ring_corners(const Lattice& lat, double L) {
    const Vec2 pA = lat.basis * Vec2(static_cast<double>(lat.row_lo.i), static_cast<double>(lat.row_lo.j));
    const Vec2 pB = lat.basis * Vec2(static_cast<double>(lat.row_hi.i), static_cast<double>(lat.row_hi.j));
    const std::array<Vec2, 6> c = {Vec2{1, 0},     Vec2{0.5, kInr},  Vec2{-0.5, kInr},
                                   Vec2{-1, 0},    Vec2{-0.5, -kInr}, Vec2{0.5, -kInr}};
    return {pB + L * c[0], pB + L * c[1], pA + L * c[2],
            pA + L * c[3], pA + L * c[4], pB + L * c[5]};
}

std::vector<Vec2> ring_positions(const std::array<Vec2, 6>& corners,
                                 const std::array<long, 6>& nsub) {
    std::vector<Vec2> out;
    for (int e = 0; e < 6; ++e) {
        const Vec2 a = corners[e], b = corners[(e + 1) % 6];
        for (long t = 0; t < nsub[e]; ++t) {
            const double s = static_cast<double>(t) / static_cast<double>(nsub[e]);
            out.push_back(a + s * (b - a));
        }
    }
    return out;
}

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

void SizeField::validate() const {
    if (!(R_a > 0)) throw std::invalid_argument("SizeField: R_a must be positive");
    if (R_b < R_a) throw std::invalid_argument("SizeField: R_b < R_a");
    if (R_c < R_b) throw std::invalid_argument("SizeField: R_c < R_b");
    if (!(exponent > 0)) throw std::invalid_argument("SizeField: exponent must be positive");
}

Mat2 TriMesh::gradient(int t, const std::vector<Vec2>& nodal) const {
    const auto& tr = triangles[t];
    const Vec2 d1 = nodal[tr[1]] - nodal[tr[0]];
    const Vec2 d2 = nodal[tr[2]] - nodal[tr[0]];
    // columns of U are the value differences; grad = U J^{-1}
    const Mat2 U(d1.x, d2.x, d1.y, d2.y);
    return U * tri_jinv[t];
}

Vec2 TriMesh::gradient_scalar(int t, const std::vector<double>& nodal) const {
    const auto& tr = triangles[t];
    const double d1 = nodal[tr[1]] - nodal[tr[0]];
    const double d2 = nodal[tr[2]] - nodal[tr[0]];
    const Mat2& Ji = tri_jinv[t];
    return {d1 * Ji(0, 0) + d2 * Ji(1, 0), d1 * Ji(0, 1) + d2 * Ji(1, 1)};
}

void TriMesh::build_locator() {
    if (triangles.empty()) return;
    Vec2 lo = nodes[0], hi = nodes[0];
    for (const auto& p : nodes) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    grid_.lo = lo;
    grid_.hi = hi;
    grid_.cell = 2.0;
    grid_.nx = std::max(1, static_cast<int>((hi.x - lo.x) / grid_.cell) + 1);
    grid_.ny = std::max(1, static_cast<int>((hi.y - lo.y) / grid_.cell) + 1);
    grid_.bins.assign(static_cast<size_t>(grid_.nx) * grid_.ny, {});
    for (int t = 0; t < n_triangles(); ++t) {
        Vec2 tlo = nodes[triangles[t][0]], thi = tlo;
        for (int k = 1; k < 3; ++k) {
            const Vec2& p = nodes[triangles[t][k]];
            tlo.x = std::min(tlo.x, p.x);
            tlo.y = std::min(tlo.y, p.y);
            thi.x = std::max(thi.x, p.x);
            thi.y = std::max(thi.y, p.y);
        }
        const int x0 = std::clamp(static_cast<int>((tlo.x - lo.x) / grid_.cell), 0, grid_.nx - 1);
        const int x1 = std::clamp(static_cast<int>((thi.x - lo.x) / grid_.cell), 0, grid_.nx - 1);
        const int y0 = std::clamp(static_cast<int>((tlo.y - lo.y) / grid_.cell), 0, grid_.ny - 1);
        const int y1 = std::clamp(static_cast<int>((thi.y - lo.y) / grid_.cell), 0, grid_.ny - 1);
        for (int yy = y0; yy <= y1; ++yy)
            for (int xx = x0; xx <= x1; ++xx)
                grid_.bins[static_cast<size_t>(yy) * grid_.nx + xx].push_back(t);
    }
}

int TriMesh::locate(const Vec2& x, std::array<double, 3>& bc) const {
    if (grid_.bins.empty()) return -1;
    if (x.x < grid_.lo.x || x.y < grid_.lo.y || x.x > grid_.hi.x || x.y > grid_.hi.y) return -1;
    const int xx = std::clamp(static_cast<int>((x.x - grid_.lo.x) / grid_.cell), 0, grid_.nx - 1);
    const int yy = std::clamp(static_cast<int>((x.y - grid_.lo.y) / grid_.cell), 0, grid_.ny - 1);
    for (int t : grid_.bins[static_cast<size_t>(yy) * grid_.nx + xx]) {
        const Vec2& a = nodes[triangles[t][0]];
        const Vec2& b = nodes[triangles[t][1]];
        const Vec2& c = nodes[triangles[t][2]];
        const double den = cross(b - a, c - a);
        const double l1 = cross(x - a, c - a) / den;
        const double l2 = cross(b - a, x - a) / den;
        const double l0 = 1.0 - l1 - l2;
        const double eps = -1e-10;
        if (l0 >= eps && l1 >= eps && l2 >= eps) {
            bc = {l0, l1, l2};
            return t;
        }
    }
    return -1;
}

TriMesh build_graded_mesh(const Lattice& lat, const SizeField& sf) {
    sf.validate();
    const double p = sf.exponent;

    if (lat.layers * kInr < sf.R_b)
        throw std::invalid_argument("build_graded_mesh: lattice region does not cover B_{R_b}");

    const long margin = 5;  // covers stencil reach of blended sites (2 r_cut + 1)
    long L0 = std::min(static_cast<long>(std::ceil(kNu * (sf.R_b + margin))), lat.layers);
    if (L0 * kInr < sf.R_b)
        throw std::invalid_argument("build_graded_mesh: refined core cannot cover the blend support");
    const double L_out = std::max(static_cast<double>(L0), sf.R_c);

    TriMesh mesh;
    mesh.lat = &lat;
    mesh.micro_layers = L0;

    // --- micro nodes -------------------------------------------------------
    mesh.node_of_atom.assign(lat.n_sites(), -1);
    for (int s = 0; s < lat.n_sites(); ++s) {
        if (lat.hops_to_row(lat.coords[s]) <= L0) {
            mesh.node_of_atom[s] = mesh.n_nodes();
            mesh.nodes.push_back(lat.positions[s]);
            mesh.atom_of_node.push_back(s);
        }
    }

    // --- micro triangles; collect vacancy-slot triangles -------------------
    std::vector<std::array<IntPt, 3>> slot_tris;
    const long i_min = lat.row_lo.i - L0 - 1, i_max = lat.row_hi.i + L0;
    const long j_min = lat.row_lo.j - L0 - 1, j_max = lat.row_lo.j + L0;
    for (long i = i_min; i <= i_max; ++i) {
        for (long j = j_min; j <= j_max; ++j) {
            const IntPt p00{i, j}, p10{i + 1, j}, p01{i, j + 1}, p11{i + 1, j + 1};
            const std::array<std::array<IntPt, 3>, 2> cand = {
                std::array<IntPt, 3>{p00, p10, p01}, std::array<IntPt, 3>{p10, p11, p01}};
            for (const auto& tri : cand) {
                bool in = true, removed = false;
                for (const auto& q : tri) {
                    if (lat.hops_to_row(q) > L0) in = false;
                    if (lat.is_removed(q)) removed = true;
                }
                if (!in) continue;
                if (removed) {
                    slot_tris.push_back(tri);
                    continue;
                }
                std::array<int, 3> ids{};
                bool ok = true;
                for (int k = 0; k < 3; ++k) {
                    const int s = lat.find(tri[k]);
                    if (s < 0 || mesh.node_of_atom[s] < 0) ok = false;
                    else ids[k] = mesh.node_of_atom[s];
                }
                if (ok) mesh.triangles.push_back(ids);
            }
        }
    }

    // --- bridge the vacancy slot (ear clipping of its boundary polygon) ----
    if (!slot_tris.empty()) {
        std::map<std::uint64_t, int> edge_count;
        auto site_edge = [&](IntPt a, IntPt b) -> std::uint64_t {
            const int sa = lat.find(a), sb = lat.find(b);
            if (sa < 0 || sb < 0) return UINT64_MAX;  // edge touching a removed site
            return edge_key(mesh.node_of_atom[sa], mesh.node_of_atom[sb]);
        };
        for (const auto& tri : slot_tris) {
            for (int k = 0; k < 3; ++k) {
                const auto key = site_edge(tri[k], tri[(k + 1) % 3]);
                if (key != UINT64_MAX) edge_count[key]++;
            }
        }
        std::unordered_map<int, std::vector<int>> adj;
        for (const auto& [key, cnt] : edge_count) {
            if (cnt == 1) {
                const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
        }
        if (!adj.empty()) {
            int start = adj.begin()->first;
            for (const auto& [n, _] : adj) start = std::min(start, n);
            std::vector<int> loop{start};
            int prev = -1, cur = start;
            while (true) {
                const auto& nb = adj.at(cur);
                if (nb.size() != 2)
                    throw std::runtime_error("build_graded_mesh: defect slot boundary is not a loop");
                const int nxt = (nb[0] == prev) ? nb[1] : nb[0];
                if (nxt == start) break;
                loop.push_back(nxt);
                prev = cur;
                cur = nxt;
            }
            double area2 = 0.0;
            for (size_t k = 0; k < loop.size(); ++k)
                area2 += cross(mesh.nodes[loop[k]], mesh.nodes[loop[(k + 1) % loop.size()]]);
            if (area2 < 0) std::reverse(loop.begin(), loop.end());

            // The slot of a vacancy row is a convex, x-monotone slab: split
            // its boundary at the extreme-x vertices and zip the two chains.
            size_t iL = 0, iR = 0;
            for (size_t k = 1; k < loop.size(); ++k) {
                auto x_of = [&](size_t idx) { return mesh.nodes[loop[idx]].x; };
                if (x_of(k) < x_of(iL) - 1e-12 ||
                    (x_of(k) < x_of(iL) + 1e-12 && mesh.nodes[loop[k]].y < mesh.nodes[loop[iL]].y))
                    iL = k;
                if (x_of(k) > x_of(iR) + 1e-12 ||
                    (x_of(k) > x_of(iR) - 1e-12 && mesh.nodes[loop[k]].y > mesh.nodes[loop[iR]].y))
                    iR = k;
            }
            std::vector<int> lower, upper;
            for (size_t k = iL;; k = (k + 1) % loop.size()) {
                lower.push_back(loop[k]);
                if (k == iR) break;
            }
            for (size_t k = iR;; k = (k + 1) % loop.size()) {
                upper.push_back(loop[k]);
                if (k == iL) break;
            }
            std::reverse(upper.begin(), upper.end());
            for (size_t k = 1; k < lower.size(); ++k)
                if (mesh.nodes[lower[k]].x < mesh.nodes[lower[k - 1]].x - 1e-9)
                    throw std::runtime_error("build_graded_mesh: defect slot is not x-monotone");
            for (size_t k = 1; k < upper.size(); ++k)
                if (mesh.nodes[upper[k]].x < mesh.nodes[upper[k - 1]].x - 1e-9)
                    throw std::runtime_error("build_graded_mesh: defect slot is not x-monotone");

            auto maybe_tri = [&](int a, int b, int c) {
                if (a == b || b == c || a == c) return;  // degenerate at the chain ends
                mesh.triangles.push_back({a, b, c});
            };
            size_t i = 0, j = 0;
            while (i + 1 < lower.size() || j + 1 < upper.size()) {
                const bool low_next =
                    j + 1 >= upper.size() ||
                    (i + 1 < lower.size() &&
                     mesh.nodes[lower[i + 1]].x <= mesh.nodes[upper[j + 1]].x);
                if (low_next) {
                    maybe_tri(lower[i], lower[i + 1], upper[j]);
                    ++i;
                } else {
                    maybe_tri(lower[i], upper[j + 1], upper[j]);
                    ++j;
                }
            }
        }
    }

    // --- coarsening rings ---------------------------------------------------
    // target edge length; the constant keeps the continuum annulus slightly
    // finer than the bare grading so strips never jump in size
    auto h_of = [&](double L) { return std::max(1.0, 0.7 * std::pow(kInr * L / sf.R_a, p)); };
    const double grow_cap = 1.8;  // per-strip growth bound (shape regularity)

    std::vector<double> radii{static_cast<double>(L0)};
    std::vector<double> ring_h{1.0};
    {
        double L = static_cast<double>(L0);
        double prev_h = 1.0;
        while (L < L_out - 1e-9) {
            const double h = std::min(h_of(L), grow_cap * prev_h);
            if (L + 1.6 * h >= L_out)
                L = L_out;
            else
                L += h;
            radii.push_back(L);
            ring_h.push_back(h);
            prev_h = h;
        }
    }

    const long rowlen = lat.row_hi.i - lat.row_lo.i;
    auto subdiv = [&](double L, double h, bool exact_lattice) -> std::array<long, 6> {
        if (exact_lattice) {
            const long n = static_cast<long>(std::lround(L));
            return {n, n + rowlen, n, n, n + rowlen, n};
        }
        const long nh = std::max<long>(1, std::lround(L / h));
        const long nr = std::max<long>(1, std::lround((L + static_cast<double>(rowlen)) / h));
        return {nh, nr, nh, nh, nr, nh};
    };

    if (radii.size() > 1) {
        const Mat2 inv_basis = inverse(lat.basis);

        // inner ring: existing lattice nodes in perimeter order
        auto lattice_ring_ids = [&](double L) {
            const auto pos = ring_positions(ring_corners(lat, L), subdiv(L, 1.0, true));
            std::vector<int> ids;
            ids.reserve(pos.size());
            for (const auto& x : pos) {
                const Vec2 cf = inv_basis * x;
                const IntPt c{std::lround(cf.x), std::lround(cf.y)};
                const int s = lat.find(c);
                if (s < 0 || mesh.node_of_atom[s] < 0)
                    throw std::runtime_error("build_graded_mesh: core ring node is not a lattice site");
                ids.push_back(mesh.node_of_atom[s]);
            }
            return ids;
        };

        std::vector<int> inner_ids = lattice_ring_ids(radii[0]);
        std::array<long, 6> inner_sub = subdiv(radii[0], 1.0, true);

        for (size_t r = 1; r < radii.size(); ++r) {
            const auto sub = subdiv(radii[r], ring_h[r], false);
            const auto pos = ring_positions(ring_corners(lat, radii[r]), sub);
            std::vector<int> outer_ids;
            outer_ids.reserve(pos.size());
            for (const auto& x : pos) {
                outer_ids.push_back(mesh.n_nodes());
                mesh.nodes.push_back(x);
                mesh.atom_of_node.push_back(-1);
            }
            // sector-wise merge walk
            long in_start = 0, out_start = 0;
            for (int e = 0; e < 6; ++e) {
                const long m1 = inner_sub[e], m2 = sub[e];
                auto in_at = [&](long k) {
                    const size_t idx = (in_start + k) % inner_ids.size();
                    return inner_ids[idx];
                };
                auto out_at = [&](long k) {
                    const size_t idx = (out_start + k) % outer_ids.size();
                    return outer_ids[idx];
                };
                long i = 0, o = 0;
                while (i < m1 || o < m2) {
                    const double ti = (i < m1) ? static_cast<double>(i + 1) / m1 : 2.0;
                    const double to = (o < m2) ? static_cast<double>(o + 1) / m2 : 2.0;
                    if (ti <= to) {
                        mesh.triangles.push_back({in_at(i), out_at(o), in_at(i + 1)});
                        ++i;
                    } else {
                        mesh.triangles.push_back({in_at(i), out_at(o), out_at(o + 1)});
                        ++o;
                    }
                }
                in_start += m1;
                out_start += m2;
            }
            inner_ids = std::move(outer_ids);
            inner_sub = sub;
        }

        mesh.clamped.assign(mesh.n_nodes(), 0);
        for (int n : inner_ids) mesh.clamped[n] = 1;
    } else {
        mesh.clamped.assign(mesh.n_nodes(), 0);
        for (int n = 0; n < mesh.n_nodes(); ++n) {
            const int s = mesh.atom_of_node[n];
            if (s >= 0 && lat.hops_to_row(lat.coords[s]) == L0) mesh.clamped[n] = 1;
        }
    }
    mesh.n_free = 0;
    for (auto c : mesh.clamped)
        if (!c) ++mesh.n_free;

    // --- per-triangle data and admissibility checks -------------------------
    const int nt = mesh.n_triangles();
    mesh.tri_area.resize(nt);
    mesh.tri_bary.resize(nt);
    mesh.tri_jinv.resize(nt);
    std::map<std::uint64_t, int> edge_audit;
    for (int t = 0; t < nt; ++t) {
        const auto& tr = mesh.triangles[t];
        const Vec2 &a = mesh.nodes[tr[0]], &b = mesh.nodes[tr[1]], &c = mesh.nodes[tr[2]];
        const double area2 = cross(b - a, c - a);
        if (area2 <= 0.0)
            throw std::runtime_error("build_graded_mesh: non-positively oriented triangle");
        mesh.tri_area[t] = 0.5 * area2;
        mesh.tri_bary[t] = (1.0 / 3.0) * (a + b + c);
        mesh.tri_jinv[t] = inverse(Mat2(b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y));
        const double h =
            std::max({norm(b - a), norm(c - b), norm(a - c)});
        mesh.h_max = std::max(mesh.h_max, h);
        mesh.shape_const = std::max(mesh.shape_const, h * h / mesh.tri_area[t]);
        for (int k = 0; k < 3; ++k) edge_audit[edge_key(tr[k], tr[(k + 1) % 3])]++;
    }
    for (const auto& [key, cnt] : edge_audit) {
        if (cnt > 2) throw std::runtime_error("build_graded_mesh: non-conforming edge");
        if (cnt == 1) {
            const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
            if (!mesh.clamped[a] || !mesh.clamped[b])
                throw std::runtime_error("build_graded_mesh: interior boundary edge (mesh has a hole)");
        }
    }
    if (mesh.shape_const > 40.0)
        throw std::runtime_error("build_graded_mesh: shape regularity violated");

    mesh.build_locator();
    return mesh;
}

double midpoint_quadrature(const TriMesh& mesh, const std::function<double(const Vec2&, int)>& f) {
    double sum = 0.0, comp = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double y = mesh.tri_area[t] * f(mesh.tri_bary[t], t) - comp;
        const double s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    return sum;
}

std::vector<Mat2> p1_gradient(const TriMesh& mesh, const std::vector<Vec2>& nodal) {
    if (static_cast<int>(nodal.size()) != mesh.n_nodes())
        throw std::invalid_argument("p1_gradient: nodal field size mismatch");
    std::vector<Mat2> out(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) out[t] = mesh.gradient(t, nodal);
    return out;
}

namespace {

template <class T>
std::vector<T> transfer_impl(const TriMesh& mesh, const std::vector<T>& nodal,
                             const Lattice& target, T zero) {
    std::vector<T> out(target.n_sites(), zero);
    const int n = target.n_sites();
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        // exact at coinciding nodes (lattices share integer coordinates)
        const int ms = mesh.lat->find(target.coords[s]);
        if (ms >= 0 && mesh.node_of_atom[ms] >= 0) {
            out[s] = nodal[mesh.node_of_atom[ms]];
            continue;
        }
        std::array<double, 3> bc{};
        const int t = mesh.locate(target.positions[s], bc);
        if (t >= 0) {
            const auto& tr = mesh.triangles[t];
            out[s] = bc[0] * nodal[tr[0]] + bc[1] * nodal[tr[1]] + bc[2] * nodal[tr[2]];
        }
    }
    return out;
}

}  // namespace

std::vector<Vec2> transfer(const TriMesh& mesh, const std::vector<Vec2>& nodal,
                           const Lattice& target) {
    return transfer_impl<Vec2>(mesh, nodal, target, Vec2{});
}

std::vector<double> transfer_scalar(const TriMesh& mesh, const std::vector<double>& nodal,
                                    const Lattice& target) {
    return transfer_impl<double>(mesh, nodal, target, 0.0);
}

void for_each_micro_triangle(const Lattice& lat, const std::function<void(int, int, int)>& f) {
    const int n = lat.n_sites();
    for (int s = 0; s < n; ++s) {
        const IntPt q = lat.coords[s];
        const int s10 = lat.find({q.i + 1, q.j});
        const int s01 = lat.find({q.i, q.j + 1});
        const int s11 = lat.find({q.i + 1, q.j + 1});
        if (s10 >= 0 && s01 >= 0) f(s, s10, s01);
        if (s10 >= 0 && s01 >= 0 && s11 >= 0) f(s10, s11, s01);
    }
}

double micro_triangle_area(const Lattice& lat) { return 0.5 * std::abs(lat.det_basis); }

Mat2 micro_gradient(const Lattice& lat, int s0, int s1, int s2, const std::vector<Vec2>& u) {
    const Vec2 e1 = lat.positions[s1] - lat.positions[s0];
    const Vec2 e2 = lat.positions[s2] - lat.positions[s0];
    const Mat2 Jinv = inverse(Mat2(e1.x, e2.x, e1.y, e2.y));
    const Vec2 d1 = u[s1] - u[s0], d2 = u[s2] - u[s0];
    return Mat2(d1.x, d2.x, d1.y, d2.y) * Jinv;
}

Vec2 micro_gradient_scalar(const Lattice& lat, int s0, int s1, int s2,
                           const std::vector<double>& u) {
    const Vec2 e1 = lat.positions[s1] - lat.positions[s0];
    const Vec2 e2 = lat.positions[s2] - lat.positions[s0];
    const Mat2 Jinv = inverse(Mat2(e1.x, e2.x, e1.y, e2.y));
    const double d1 = u[s1] - u[s0], d2 = u[s2] - u[s0];
    return {d1 * Jinv(0, 0) + d2 * Jinv(1, 0), d1 * Jinv(0, 1) + d2 * Jinv(1, 1)};
}

std::string TriMesh::to_json() const {
    nlohmann::json j;
    auto& ns = j["nodes"] = nlohmann::json::array();
    for (const auto& p : nodes) ns.push_back({p.x, p.y});
    auto& ts = j["triangles"] = nlohmann::json::array();
    for (const auto& t : triangles) ts.push_back({t[0], t[1], t[2]});
    j["atom_of_node"] = atom_of_node;
    auto& cl = j["clamped"] = nlohmann::json::array();
    for (auto c : clamped) cl.push_back(static_cast<int>(c));
    return j.dump();
}

}  // namespace ac
