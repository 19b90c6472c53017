#include "ac/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ac {

const char* kCsvHeader = "method,R_a,K_blend,DOF,err_h1,err_w1inf,err_energy_abs,err_energy_rel,wall_time_s";

namespace {

constexpr double kNu = 1.1547005383792515;  // 2/sqrt(3)

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::string reports_to_csv(const std::vector<ErrorReport>& rows) {
    std::ostringstream os;
    os << kCsvHeader << "\n";
    for (const auto& r : rows) {
        os << r.method << "," << fmt(r.R_a) << "," << fmt(r.K_blend) << "," << r.dof << ","
           << fmt(r.err_h1) << "," << fmt(r.err_w1inf) << "," << fmt(r.err_energy_abs) << ","
           << fmt(r.err_energy_rel) << "," << fmt(r.wall_time_s) << "\n";
    }
    return os.str();
}

void write_csv(const std::string& path, const std::vector<ErrorReport>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    f << reports_to_csv(rows);
}

std::vector<ErrorReport> reports_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("reports_from_csv: empty input");
    if (line != kCsvHeader) throw std::runtime_error("reports_from_csv: unexpected header");
    std::vector<ErrorReport> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ErrorReport r;
        std::string tok;
        std::getline(ls, r.method, ',');
        auto next = [&]() {
            std::getline(ls, tok, ',');
            return std::stod(tok);
        };
        r.R_a = next();
        r.K_blend = next();
        r.dof = static_cast<long>(next());
        r.err_h1 = next();
        r.err_w1inf = next();
        r.err_energy_abs = next();
        r.err_energy_rel = next();
        r.wall_time_s = next();
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

template <class Field, class GradFn>
ErrorNorms norms_impl(const Lattice& ref_lat, const Field& u_ref, const Field& u_other,
                      const Vec2& center, double r_outer, double r_excl, GradFn&& grad_diff) {
    double sum = 0.0;
    double mx = 0.0;
    const double area = micro_triangle_area(ref_lat);
    for_each_micro_triangle(ref_lat, [&](int s0, int s1, int s2) {
        const Vec2 bary =
            (1.0 / 3.0) * (ref_lat.positions[s0] + ref_lat.positions[s1] + ref_lat.positions[s2]);
        const double d = norm(bary - center);
        if (d <= r_excl || d > r_outer) return;
        const double g2 = grad_diff(s0, s1, s2);
        sum += area * g2;
        mx = std::max(mx, g2);
    });
    return {std::sqrt(sum), std::sqrt(mx)};
}

}  // namespace

ErrorNorms error_norms(const Lattice& ref_lat, const Displacement& u_ref,
                       const Displacement& u_other, const Vec2& center, double r_outer,
                       double r_excl) {
    return norms_impl(ref_lat, u_ref, u_other, center, r_outer, r_excl,
                      [&](int s0, int s1, int s2) {
                          const Mat2 G = micro_gradient(ref_lat, s0, s1, s2, u_ref) -
                                         micro_gradient(ref_lat, s0, s1, s2, u_other);
                          const double f = frobenius(G);
                          return f * f;
                      });
}

ErrorNorms error_norms_scalar(const Lattice& ref_lat, const ScalarField& u_ref,
                              const ScalarField& u_other, const Vec2& center, double r_outer,
                              double r_excl) {
    return norms_impl(ref_lat, u_ref, u_other, center, r_outer, r_excl,
                      [&](int s0, int s1, int s2) {
                          const Vec2 g = micro_gradient_scalar(ref_lat, s0, s1, s2, u_ref) -
                                         micro_gradient_scalar(ref_lat, s0, s1, s2, u_other);
                          return norm2(g);
                      });
}

double error_h1(const Lattice& ref_lat, const Displacement& u_ref, const Displacement& u_other,
                const Vec2& center, double r_outer, double r_excl) {
    return error_norms(ref_lat, u_ref, u_other, center, r_outer, r_excl).h1;
}

double error_w1inf(const Lattice& ref_lat, const Displacement& u_ref, const Displacement& u_other,
                   const Vec2& center, double r_outer, double r_excl) {
    return error_norms(ref_lat, u_ref, u_other, center, r_outer, r_excl).w1inf;
}

std::pair<double, double> error_energy(double E_ref, double E_h) {
    if (!std::isfinite(E_ref) || !std::isfinite(E_h))
        throw std::invalid_argument("error_energy: energies must be finite");
    const double abs = std::abs(E_ref - E_h);
    return {abs, abs / std::max(std::abs(E_ref), 1e-30)};
}

double fit_slope(const std::vector<std::pair<double, double>>& points, int last_m) {
    if (points.size() < 3) throw std::invalid_argument("fit_slope: need at least 3 points");
    size_t first = 0;
    if (last_m > 0 && static_cast<size_t>(last_m) < points.size())
        first = points.size() - static_cast<size_t>(last_m);
    const size_t n = points.size() - first;
    if (n < 2) throw std::invalid_argument("fit_slope: need at least 2 fitted points");
    double sx = 0, sy = 0;
    for (size_t i = first; i < points.size(); ++i) {
        if (!(points[i].first > 0) || !(points[i].second > 0))
            throw std::invalid_argument("fit_slope: nonpositive input");
        sx += std::log(points[i].first);
        sy += std::log(points[i].second);
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (size_t i = first; i < points.size(); ++i) {
        const double dx = std::log(points[i].first) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(points[i].second) - my);
    }
    if (sxx == 0) throw std::invalid_argument("fit_slope: degenerate abscissae");
    return sxy / sxx;
}

const char* benchmark_name(Benchmark b) {
    switch (b) {
        case Benchmark::divacancy: return "divacancy";
        case Benchmark::microcrack: return "microcrack";
        case Benchmark::dislocation: return "dislocation";
    }
    return "?";
}

Benchmark benchmark_from_name(const std::string& name) {
    if (name == "divacancy") return Benchmark::divacancy;
    if (name == "microcrack") return Benchmark::microcrack;
    if (name == "dislocation") return Benchmark::dislocation;
    throw std::invalid_argument("unknown benchmark: " + name);
}

long blend_width(StudyConfig::BlendRule rule, double R_a) {
    if (rule == StudyConfig::BlendRule::cuberoot)
        return static_cast<long>(std::ceil(std::cbrt(R_a)));
    return static_cast<long>(std::lround(R_a));
}

Mat2 loading_matrix(Benchmark b, const Loading& l, double t_star) {
    const Mat2 F0 = Mat2::scale(t_star);
    if (b == Benchmark::divacancy) return Mat2(1.0 + l.s, l.gamma_II, 0.0, 1.0 + l.s) * F0;
    if (b == Benchmark::microcrack) return Mat2(1.0, l.gamma_II, 0.0, 1.0 + l.gamma_I) * F0;
    throw std::invalid_argument("loading_matrix: dislocation loading is the predictor field");
}

StudyConfig StudyConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    StudyConfig c;
    if (j.contains("benchmark")) c.benchmark = benchmark_from_name(j["benchmark"]);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(method_from_name(m));
    }
    if (j.contains("sizes")) {
        c.sizes.clear();
        for (const auto& s : j["sizes"]) c.sizes.push_back(s.get<double>());
    }
    if (j.contains("blend_width_rule")) {
        const std::string r = j["blend_width_rule"];
        if (r == "cuberoot") c.blend_rule = BlendRule::cuberoot;
        else if (r == "proportional") c.blend_rule = BlendRule::proportional;
        else throw std::invalid_argument("unknown blend_width_rule: " + r);
    }
    if (j.contains("loading")) {
        const auto& L = j["loading"];
        c.loading.s = L.value("s", c.loading.s);
        c.loading.gamma_I = L.value("gamma_I", c.loading.gamma_I);
        c.loading.gamma_II = L.value("gamma_II", c.loading.gamma_II);
    }
    if (j.contains("tolerances")) {
        const auto& T = j["tolerances"];
        c.ref_tol = T.value("reference", c.ref_tol);
        c.solve_tol = T.value("solve", c.solve_tol);
    }
    c.optimized_blend = j.value("optimized_blend", c.optimized_blend);
    c.record_timings = j.value("record_timings", c.record_timings);
    return c;
}

std::string StudyConfig::to_json() const {
    nlohmann::json j;
    j["benchmark"] = benchmark_name(benchmark);
    auto& ms = j["methods"] = nlohmann::json::array();
    for (auto m : methods) ms.push_back(method_name(m));
    j["sizes"] = sizes;
    j["blend_width_rule"] = blend_rule == BlendRule::cuberoot ? "cuberoot" : "proportional";
    j["loading"] = {{"s", loading.s}, {"gamma_I", loading.gamma_I}, {"gamma_II", loading.gamma_II}};
    j["tolerances"] = {{"reference", ref_tol}, {"solve", solve_tol}};
    j["optimized_blend"] = optimized_blend;
    j["record_timings"] = record_timings;
    return j.dump(2);
}

Displacement solve_reference_continuation(LoadedProblem& prob, double final_radius, double tol,
                                          double* doubling_h1) {
    std::vector<double> radii{final_radius};
    while (radii.back() / 2.0 >= 48.0) radii.push_back(radii.back() / 2.0);
    std::reverse(radii.begin(), radii.end());

    Displacement u(prob.sys->lat->n_sites());
    Displacement prev;
    for (size_t lvl = 0; lvl < radii.size(); ++lvl) {
        prob.set_free_radius(radii[lvl]);
        const double lvl_tol = (lvl + 1 == radii.size()) ? tol : std::max(10.0 * tol, 1e-6);
        if (lvl + 1 == radii.size()) prev = u;
        u = solve_reference(prob, lvl_tol, 40000, &u);
    }
    if (doubling_h1) {
        if (radii.size() >= 2) {
            const Vec2 c = prob.sys->lat->defect_center();
            *doubling_h1 = error_norms(*prob.sys->lat, u, prev, c, radii[radii.size() - 2] / 2.0,
                                       prob.sys->lat->r_def + prob.sys->pot.r_cut)
                               .h1;
        } else {
            *doubling_h1 = 0.0;
        }
    }
    return u;
}

ScalarField ap_reference_continuation(AntiplaneModel& m, double final_radius, double tol,
                                      double* doubling_h1) {
    std::vector<double> radii{final_radius};
    while (radii.back() / 2.0 >= 48.0) radii.push_back(radii.back() / 2.0);
    std::reverse(radii.begin(), radii.end());

    ScalarField u(m.lat->n_sites(), 0.0);
    ScalarField prev;
    for (size_t lvl = 0; lvl < radii.size(); ++lvl) {
        m.set_free_radius(radii[lvl]);
        const double lvl_tol = (lvl + 1 == radii.size()) ? tol : std::max(10.0 * tol, 1e-6);
        if (lvl + 1 == radii.size()) prev = u;
        u = ap_solve_reference(m, lvl_tol, 40000, &u);
    }
    if (doubling_h1) {
        if (radii.size() >= 2) {
            const Vec2 c = m.lat->defect_center();
            *doubling_h1 = error_norms_scalar(*m.lat, u, prev, c, radii[radii.size() - 2] / 2.0,
                                              m.lat->r_def + 2.0)
                               .h1;
        } else {
            *doubling_h1 = 0.0;
        }
    }
    return u;
}

namespace {

// maps a displacement on src onto the sites of ref (shared integer coords)
Displacement displacement_onto(const Lattice& ref, const Lattice& src, const Displacement& u_src) {
    Displacement out(ref.n_sites());
    for (int s = 0; s < src.n_sites(); ++s) {
        const int r = ref.find(src.coords[s]);
        if (r >= 0) out[r] = u_src[s];
    }
    return out;
}

long model_layers(double R_b) { return static_cast<long>(std::ceil(kNu * (R_b + 5.0))) + 1; }

StudyResult dislocation_study(const StudyConfig& cfg);

}  // namespace

StudyResult convergence_study(const StudyConfig& cfg) {
    if (cfg.sizes.empty()) throw std::invalid_argument("convergence_study: no sizes");
    for (size_t i = 1; i < cfg.sizes.size(); ++i)
        if (cfg.sizes[i] <= cfg.sizes[i - 1])
            throw std::invalid_argument("convergence_study: sizes must be strictly increasing");

    if (cfg.benchmark == Benchmark::dislocation) return dislocation_study(cfg);

    const long defect_k = cfg.benchmark == Benchmark::divacancy ? 2 : 11;

    EamParams pot;
    const double t_star = equilibrium_scale(pot);
    const Mat2 B = loading_matrix(cfg.benchmark, cfg.loading, t_star);

    double R_c_max = 0.0;
    for (double ra : cfg.sizes) R_c_max = std::max(R_c_max, std::ceil(0.5 * ra * ra));
    const double free_ref = 2.0 * R_c_max;

    StudyResult out;

    // shared reference solve on the large truncated domain
    LatticeSpec ref_spec;
    ref_spec.region.layers = static_cast<long>(std::ceil(kNu * (free_ref + pot.r_cut))) + 1;
    ref_spec.defect_k = defect_k;
    const Lattice ref_lat = build_lattice(ref_spec);
    out.reference_sites = ref_lat.n_sites();
    const AtomisticSystem ref_sys = make_system(ref_lat, pot);
    LoadedProblem ref_prob = make_loaded_problem(ref_sys, B, free_ref);
    const Displacement u_ref =
        solve_reference_continuation(ref_prob, free_ref, cfg.ref_tol, &out.reference_doubling_h1);
    out.reference_energy = energy_atm(ref_prob, u_ref);

    const Vec2 center = ref_lat.defect_center();
    const double r_excl = ref_lat.r_def + pot.r_cut;
    const double r_outer = free_ref / 2.0;

    for (double ra : cfg.sizes) {
        const long K = blend_width(cfg.blend_rule, ra);
        const double rb = ra + static_cast<double>(K);
        const double rc = std::max(std::ceil(0.5 * ra * ra), static_cast<double>(model_layers(rb)));

        LatticeSpec spec;
        spec.region.layers = model_layers(rb);
        spec.defect_k = defect_k;
        const Lattice lat = build_lattice(spec);
        const AtomisticSystem sys = make_system(lat, pot);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{ra, rb, rc, 1.5});
        const Blend blend =
            cfg.optimized_blend ? optimize_beta(mesh, ra, rb) : spline_beta(mesh, ra, rb);

        for (Method method : cfg.methods) {
            ErrorReport row;
            row.method = method_name(method);
            row.R_a = ra;
            row.K_blend = static_cast<double>(K);
            const double t0 = now_seconds();
            try {
                Displacement u_on_ref;
                double E_h = 0.0;
                if (method == Method::ATM) {
                    LatticeSpec aspec;
                    aspec.region.layers =
                        static_cast<long>(std::ceil(kNu * (ra + pot.r_cut))) + 1;
                    aspec.defect_k = defect_k;
                    const Lattice alat = build_lattice(aspec);
                    const AtomisticSystem asys = make_system(alat, pot);
                    LoadedProblem aprob = make_loaded_problem(asys, B, ra);
                    const Displacement ua = solve_reference(aprob, cfg.solve_tol);
                    E_h = energy_atm(aprob, ua);
                    u_on_ref = displacement_onto(ref_lat, alat, ua);
                    row.dof = alat.n_sites();
                } else {
                    CoupledModel model = make_model(method, sys, mesh, blend, B);
                    SolverConfig scfg;
                    scfg.grad_tol = cfg.solve_tol;
                    scfg.max_iter = 50000;
                    const CoupledSolve sol = solve_coupled(model, scfg);
                    if (!sol.stats.converged)
                        throw std::runtime_error("solver: " + sol.stats.message);
                    E_h = sol.energy;
                    u_on_ref = transfer(mesh, sol.u, ref_lat);
                    row.dof = mesh.n_nodes();
                }
                const ErrorNorms en = error_norms(ref_lat, u_ref, u_on_ref, center, r_outer, r_excl);
                row.err_h1 = en.h1;
                row.err_w1inf = en.w1inf;
                std::tie(row.err_energy_abs, row.err_energy_rel) =
                    error_energy(out.reference_energy, E_h);
            } catch (const std::exception& e) {
                std::cerr << "study row failed (" << row.method << ", R_a=" << ra
                          << "): " << e.what() << "\n";
                row.err_h1 = row.err_w1inf = row.err_energy_abs = row.err_energy_rel =
                    std::numeric_limits<double>::quiet_NaN();
            }
            row.wall_time_s = cfg.record_timings ? now_seconds() - t0 : 0.0;
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

namespace {

StudyResult dislocation_study(const StudyConfig& cfg) {
    StudyResult out;

    double R_c_max = 0.0;
    for (double ra : cfg.sizes) R_c_max = std::max(R_c_max, std::ceil(0.5 * ra * ra));
    const double free_ref = 2.0 * R_c_max;

    LatticeSpec ref_spec;
    ref_spec.region.layers = static_cast<long>(std::ceil(kNu * (free_ref + 1.0))) + 1;
    const Lattice ref_lat = build_lattice(ref_spec);
    out.reference_sites = ref_lat.n_sites();
    AntiplaneModel ref_apm = make_antiplane(ref_lat, free_ref);
    const ScalarField u_ref =
        ap_reference_continuation(ref_apm, free_ref, cfg.ref_tol, &out.reference_doubling_h1);
    ref_apm.set_free_radius(free_ref);
    out.reference_energy = ap_energy(ref_apm, u_ref);

    const Vec2 center = ref_lat.defect_center();
    const double r_excl = 2.0;
    const double r_outer = free_ref / 2.0;

    for (double ra : cfg.sizes) {
        const long K = blend_width(cfg.blend_rule, ra);
        const double rb = ra + static_cast<double>(K);
        const double rc = std::max(std::ceil(0.5 * ra * ra), static_cast<double>(model_layers(rb)));

        LatticeSpec spec;
        spec.region.layers = model_layers(rb);
        const Lattice lat = build_lattice(spec);
        AntiplaneModel apm = make_antiplane(lat, 0.0);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{ra, rb, rc, 1.0});
        const Blend blend =
            cfg.optimized_blend ? optimize_beta(mesh, ra, rb) : spline_beta(mesh, ra, rb);

        for (Method method : cfg.methods) {
            if (method != Method::BGFC && method != Method::BQCE) continue;
            ErrorReport row;
            row.method = method_name(method);
            row.R_a = ra;
            row.K_blend = static_cast<double>(K);
            const double t0 = now_seconds();
            try {
                const ApCoupled model = make_ap_coupled(apm, mesh, blend);
                SolverConfig scfg;
                scfg.grad_tol = cfg.solve_tol;
                scfg.max_iter = 50000;
                const ApSolve sol = ap_solve_coupled(model, scfg);
                if (!sol.stats.converged) throw std::runtime_error("solver: " + sol.stats.message);
                const ScalarField u_on_ref = transfer_scalar(mesh, sol.u, ref_lat);
                const ErrorNorms en =
                    error_norms_scalar(ref_lat, u_ref, u_on_ref, center, r_outer, r_excl);
                row.dof = mesh.n_nodes();
                row.err_h1 = en.h1;
                row.err_w1inf = en.w1inf;
                std::tie(row.err_energy_abs, row.err_energy_rel) =
                    error_energy(out.reference_energy, sol.energy);
            } catch (const std::exception& e) {
                std::cerr << "study row failed (" << row.method << ", R_a=" << ra
                          << "): " << e.what() << "\n";
                row.err_h1 = row.err_w1inf = row.err_energy_abs = row.err_energy_rel =
                    std::numeric_limits<double>::quiet_NaN();
            }
            row.wall_time_s = cfg.record_timings ? now_seconds() - t0 : 0.0;
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace

double ghost_audit(CoupledModel& model) {
    const NodalField zero(model.mesh->n_nodes());
    NodalField g;
    switch (model.kind) {
        case Method::BQCE: g = grad_bqce(model, zero); break;
        case Method::BQCF: g = forces_bqcf(model, zero); break;
        case Method::BGFC: g = grad_bgfc(model, zero); break;
        default: throw std::invalid_argument("ghost_audit: unsupported model kind");
    }
    double mx = 0.0;
    for (int n : model.free_nodes) mx = std::max({mx, std::abs(g[n].x), std::abs(g[n].y)});
    return mx;
}

double ghost_audit_instance(Method kind, double R_a, long K_blend, bool optimized_blend) {
    EamParams pot;
    const double t_star = equilibrium_scale(pot);
    const Mat2 B = Mat2::scale(t_star);

    const double rb = R_a + static_cast<double>(K_blend);
    LatticeSpec spec;
    spec.region.layers = model_layers(rb);
    const Lattice lat = build_lattice(spec);

    if (kind == Method::ATM) {
        const AtomisticSystem sys = make_system(lat, pot);
        LoadedProblem prob = make_loaded_problem(sys, B, R_a);
        const Displacement zero(lat.n_sites());
        const Displacement g = grad_atm(prob, zero);
        double mx = 0.0;
        for (const auto& v : g) mx = std::max({mx, std::abs(v.x), std::abs(v.y)});
        return mx;
    }

    const AtomisticSystem sys = make_system(lat, pot);
    const double rc = static_cast<double>(spec.region.layers) + 8.0;
    const TriMesh mesh = build_graded_mesh(lat, SizeField{R_a, rb, rc, 1.5});
    const Blend blend = optimized_blend ? optimize_beta(mesh, R_a, rb) : spline_beta(mesh, R_a, rb);
    CoupledModel model = make_model(kind, sys, mesh, blend, B);
    return ghost_audit(model);
}

}  // namespace ac
