#include "ac/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace ac {

Mat2 triangular_basis() {
    return {1.0, std::cos(M_PI / 3.0), 0.0, std::sin(M_PI / 3.0)};
}

long hop_distance(IntPt a, IntPt b) {
    const long di = a.i - b.i, dj = a.j - b.j;
    return (std::labs(di) + std::labs(dj) + std::labs(di + dj)) / 2;
}

std::vector<IntPt> vacancy_set(long k) {
    if (k < 0) throw std::invalid_argument("vacancy_set: k must be nonnegative");
    std::vector<IntPt> out;
    out.reserve(static_cast<size_t>(k));
    long lo, hi;
    if (k % 2 == 1) {
        lo = -(k - 1) / 2;
        hi = (k - 1) / 2;
    } else {
        lo = -(k / 2 - 1);
        hi = k / 2;
    }
    if (k == 0) return out;
    for (long m = lo; m <= hi; ++m) out.push_back({m, 0});
    return out;
}

namespace {

// Hop distance from (i,j) to the row {(m,0) : m in [m_lo, m_hi]}.
long hops_to_segment(long i, long j, long m_lo, long m_hi) {
    // Unconstrained minimizers satisfy m in [min(i,i+j), max(i,i+j)].
    const long a = std::min(i, i + j), b = std::max(i, i + j);
    long m;
    if (b < m_lo)
        m = m_lo;
    else if (a > m_hi)
        m = m_hi;
    else
        return std::labs(j);
    return hop_distance({i, j}, {m, 0});
}

}  // namespace

int Lattice::find(IntPt p) const {
    const long ri = p.i - i_lo_;
    if (ri < 0 || ri >= static_cast<long>(rows_.size())) return -1;
    const Row& row = rows_[ri];
    if (p.j < row.j_lo || p.j > row.j_hi) return -1;
    std::int64_t idx = row.base + (p.j - row.j_lo);
    // correct for removed sites ordered before p, reject p itself if removed
    auto it = std::lower_bound(removed.begin(), removed.end(), p);
    if (it != removed.end() && *it == p) return -1;
    idx -= static_cast<std::int64_t>(it - removed.begin());
    return static_cast<int>(idx);
}

bool Lattice::is_removed(IntPt p) const {
    return std::binary_search(removed.begin(), removed.end(), p);
}

long Lattice::hops_to_row(IntPt p) const {
    return hops_to_segment(p.i - row_lo.i, p.j - row_lo.j, 0, row_hi.i - row_lo.i);
}

Vec2 Lattice::defect_center() const {
    const Vec2 a = basis * Vec2(static_cast<double>(row_lo.i), static_cast<double>(row_lo.j));
    const Vec2 b = basis * Vec2(static_cast<double>(row_hi.i), static_cast<double>(row_hi.j));
    return 0.5 * (a + b);
}

void Lattice::rebuild_index() {
    if (coords.empty() && removed.empty()) {
        rows_.clear();
        i_lo_ = 0;
        return;
    }
    // merge present and removed coordinates; both sorted lexicographically
    std::vector<IntPt> all;
    all.reserve(coords.size() + removed.size());
    std::merge(coords.begin(), coords.end(), removed.begin(), removed.end(),
               std::back_inserter(all));
    i_lo_ = all.front().i;
    const long i_hi = all.back().i;
    rows_.assign(static_cast<size_t>(i_hi - i_lo_ + 1), Row{});
    size_t p = 0;
    std::int64_t base = 0;
    while (p < all.size()) {
        const long i = all[p].i;
        size_t q = p;
        while (q + 1 < all.size() && all[q + 1].i == i) ++q;
        Row& row = rows_[i - i_lo_];
        row.j_lo = all[p].j;
        row.j_hi = all[q].j;
        row.base = base;
        if (row.j_hi - row.j_lo + 1 != static_cast<long>(q - p + 1))
            throw std::invalid_argument("Lattice: non-contiguous row in site set");
        base += q - p + 1;
        p = q + 1;
    }
}

Lattice build_lattice(const LatticeSpec& spec) {
    if (std::abs(det(spec.basis)) <= 0.0)
        throw std::invalid_argument("build_lattice: singular basis");
    if (spec.region.layers < 0)
        throw std::invalid_argument("build_lattice: negative layer count");
    if (spec.defect_k < 0)
        throw std::invalid_argument("build_lattice: negative defect_k");

    Lattice lat;
    lat.basis = spec.basis;
    lat.det_basis = det(spec.basis);
    lat.layers = spec.region.layers;

    const auto vac = vacancy_set(spec.defect_k);

    // seed row: the defect row, or an explicit elongation, centered at region.center
    long m_lo = 0, m_hi = 0;
    if (spec.region.elongation >= 0) {
        m_lo = 0;
        m_hi = spec.region.elongation;
    } else if (!vac.empty()) {
        m_lo = vac.front().i;
        m_hi = vac.back().i;
    }
    const IntPt c = spec.region.center;
    lat.row_lo = {c.i + m_lo, c.j};
    lat.row_hi = {c.i + m_hi, c.j};

    // vacancies inside the region?
    const long K = spec.region.layers;
    for (const auto& v : vac) {
        if (hops_to_segment(v.i - m_lo, v.j, 0, m_hi - m_lo) > K)
            throw std::invalid_argument("build_lattice: defect sites outside region");
        lat.removed.push_back({c.i + v.i, c.j + v.j});
    }
    std::sort(lat.removed.begin(), lat.removed.end());

    lat.i_lo_ = c.i + m_lo - K;
    const long i_hi = c.i + m_hi + K;
    lat.rows_.assign(static_cast<size_t>(i_hi - lat.i_lo_ + 1), Lattice::Row{});

    std::int64_t base = 0;
    for (long i = lat.i_lo_; i <= i_hi; ++i) {
        // contiguous j-interval of region membership for this i
        long j_lo = 1, j_hi = 0;
        for (long j = -K; j <= K; ++j) {
            if (hops_to_segment(i - c.i - m_lo, j - c.j, 0, m_hi - m_lo) <= K) {
                if (j_lo > j_hi) j_lo = j;
                j_hi = j;
            }
        }
        Lattice::Row& row = lat.rows_[i - lat.i_lo_];
        row.j_lo = j_lo;
        row.j_hi = j_hi;
        row.base = base;
        if (j_lo <= j_hi) base += j_hi - j_lo + 1;
    }

    const std::int64_t total = base;
    lat.coords.reserve(static_cast<size_t>(total - static_cast<long>(lat.removed.size())));
    for (long i = lat.i_lo_; i <= i_hi; ++i) {
        const auto& row = lat.rows_[i - lat.i_lo_];
        for (long j = row.j_lo; j <= row.j_hi; ++j) {
            if (!lat.is_removed({i, j})) lat.coords.push_back({i, j});
        }
    }
    lat.positions.resize(lat.coords.size());
    for (size_t s = 0; s < lat.coords.size(); ++s) {
        lat.positions[s] = lat.basis * Vec2(static_cast<double>(lat.coords[s].i),
                                            static_cast<double>(lat.coords[s].j));
    }

    const Vec2 ctr = lat.defect_center();
    for (const auto& v : lat.removed) {
        const Vec2 p = lat.basis * Vec2(static_cast<double>(v.i), static_cast<double>(v.j));
        lat.r_def = std::max(lat.r_def, norm(p - ctr));
    }
    return lat;
}

std::vector<IntPt> stencil_offsets(const Mat2& basis, double r_cut) {
    if (r_cut <= 0.0) throw std::invalid_argument("stencil_offsets: r_cut must be positive");
    const Mat2 inv = inverse(basis);
    // |i| = |row0(inv) . x| <= ||row0(inv)|| r_cut, likewise for j
    const double bi = std::sqrt(inv(0, 0) * inv(0, 0) + inv(0, 1) * inv(0, 1)) * r_cut;
    const double bj = std::sqrt(inv(1, 0) * inv(1, 0) + inv(1, 1) * inv(1, 1)) * r_cut;
    const long Mi = static_cast<long>(std::ceil(bi)) + 1;
    const long Mj = static_cast<long>(std::ceil(bj)) + 1;
    const double r2max = r_cut * r_cut * (1.0 + 1e-12) + 1e-12;
    std::vector<IntPt> out;
    for (long i = -Mi; i <= Mi; ++i) {
        for (long j = -Mj; j <= Mj; ++j) {
            if (i == 0 && j == 0) continue;
            const Vec2 v = basis * Vec2(static_cast<double>(i), static_cast<double>(j));
            if (norm2(v) <= r2max) out.push_back({i, j});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Stencil neighbor_stencil(const Lattice& lat, int site, double r_cut) {
    if (site < 0 || site >= lat.n_sites())
        throw std::out_of_range("neighbor_stencil: invalid site index");
    Stencil st;
    st.r_cut = r_cut;
    const IntPt p = lat.coords[site];
    for (const auto& d : stencil_offsets(lat.basis, r_cut)) {
        if (lat.find({p.i + d.i, p.j + d.j}) >= 0) {
            st.offsets.push_back(d);
            st.directions.push_back(lat.basis *
                                    Vec2(static_cast<double>(d.i), static_cast<double>(d.j)));
        }
    }
    return st;
}

NeighborTable build_neighbor_table(const Lattice& lat, double r_cut) {
    const auto cand = stencil_offsets(lat.basis, r_cut);
    if (cand.size() > 127) throw std::invalid_argument("build_neighbor_table: stencil too large");
    const int n = lat.n_sites();
    NeighborTable tab;
    tab.r_cut = r_cut;
    tab.dirs = cand;
    tab.offsets.assign(static_cast<size_t>(n) + 1, 0);

    std::vector<std::int32_t> deg(n, 0);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const IntPt p = lat.coords[s];
        std::int32_t d = 0;
        for (const auto& o : cand)
            if (lat.find({p.i + o.i, p.j + o.j}) >= 0) ++d;
        deg[s] = d;
    }
    for (int s = 0; s < n; ++s) tab.offsets[s + 1] = tab.offsets[s] + deg[s];
    tab.nbr.resize(static_cast<size_t>(tab.offsets[n]));
    tab.dir.resize(tab.nbr.size());

#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const IntPt p = lat.coords[s];
        std::int64_t w = tab.offsets[s];
        for (size_t c = 0; c < cand.size(); ++c) {
            const int b = lat.find({p.i + cand[c].i, p.j + cand[c].j});
            if (b >= 0) {
                tab.nbr[w] = b;
                tab.dir[w] = static_cast<std::int8_t>(c);
                ++w;
            }
        }
    }
    return tab;
}

double hex_gauge(const Vec2& v) {
    // Unit ball: hexagon with corners at the 6 nearest-neighbor directions.
    // Edge normals sit at 30/90/150 degrees; the inradius is sqrt(3)/2.
    const double h = std::sqrt(3.0) / 2.0;
    const double t1 = std::abs(h * v.x + 0.5 * v.y);
    const double t2 = std::abs(v.y);
    const double t3 = std::abs(-h * v.x + 0.5 * v.y);
    return std::max({t1, t2, t3}) / h;
}

double hex_gauge_to_row(const Lattice& lat, const Vec2& x) {
    const Vec2 a = lat.basis * Vec2(static_cast<double>(lat.row_lo.i), static_cast<double>(lat.row_lo.j));
    const Vec2 b = lat.basis * Vec2(static_cast<double>(lat.row_hi.i), static_cast<double>(lat.row_hi.j));
    // project onto the row segment (horizontal), then measure the hex gauge
    double t = 0.0;
    const Vec2 ab = b - a;
    const double L2 = norm2(ab);
    if (L2 > 0) t = std::clamp(dot(x - a, ab) / L2, 0.0, 1.0);
    return hex_gauge(x - (a + t * ab));
}

std::string Lattice::to_json() const {
    nlohmann::json j;
    j["basis"] = {{basis(0, 0), basis(0, 1)}, {basis(1, 0), basis(1, 1)}};
    auto& sites = j["sites"] = nlohmann::json::array();
    for (const auto& c : coords) sites.push_back({c.i, c.j});
    auto& rem = j["removed"] = nlohmann::json::array();
    for (const auto& c : removed) rem.push_back({c.i, c.j});
    j["layers"] = layers;
    j["row"] = {{row_lo.i, row_lo.j}, {row_hi.i, row_hi.j}};
    return j.dump();
}

Lattice Lattice::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Lattice lat;
    lat.basis = Mat2(j["basis"][0][0], j["basis"][0][1], j["basis"][1][0], j["basis"][1][1]);
    lat.det_basis = det(lat.basis);
    for (const auto& s : j["sites"]) lat.coords.push_back({s[0], s[1]});
    for (const auto& s : j["removed"]) lat.removed.push_back({s[0], s[1]});
    if (!std::is_sorted(lat.coords.begin(), lat.coords.end()))
        throw std::invalid_argument("Lattice::from_json: sites not in index order");
    std::sort(lat.removed.begin(), lat.removed.end());
    lat.layers = j.value("layers", 0L);
    if (j.contains("row")) {
        lat.row_lo = {j["row"][0][0], j["row"][0][1]};
        lat.row_hi = {j["row"][1][0], j["row"][1][1]};
    }
    lat.positions.resize(lat.coords.size());
    for (size_t s = 0; s < lat.coords.size(); ++s)
        lat.positions[s] = lat.basis * Vec2(static_cast<double>(lat.coords[s].i),
                                            static_cast<double>(lat.coords[s].j));
    lat.rebuild_index();
    const Vec2 ctr = lat.defect_center();
    for (const auto& v : lat.removed) {
        const Vec2 p = lat.basis * Vec2(static_cast<double>(v.i), static_cast<double>(v.j));
        lat.r_def = std::max(lat.r_def, norm(p - ctr));
    }
    return lat;
}

}  // namespace ac
