// Benchmark CLI: ghost-force audits, single solves, convergence studies and
// slope postprocessing for the blended atomistic/continuum schemes.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ac/study.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

int cmd_audit(double R_a, const std::vector<long>& widths, bool optimized) {
    std::cout << "method,K,residual_inf\n";
    for (long K : widths) {
        for (ac::Method m : {ac::Method::BQCE, ac::Method::BQCF, ac::Method::BGFC}) {
            const double r = ac::ghost_audit_instance(m, R_a, K, optimized);
            std::cout << ac::method_name(m) << "," << K << "," << r << "\n";
        }
    }
    return 0;
}

int cmd_solve(const std::string& benchmark, const std::string& method, double R_a,
              const std::string& out_path, double tol) {
    using namespace ac;
    StudyConfig cfg;
    cfg.benchmark = benchmark_from_name(benchmark);
    cfg.solve_tol = tol;

    EamParams pot;
    const double t_star = equilibrium_scale(pot);
    const long K = blend_width(cfg.blend_rule, R_a);
    const double rb = R_a + static_cast<double>(K);
    const long layers = static_cast<long>(std::ceil(1.1547005383792515 * (rb + 5.0))) + 1;
    const double rc = std::max(std::ceil(0.5 * R_a * R_a), static_cast<double>(layers));

    nlohmann::json j;
    if (cfg.benchmark == Benchmark::dislocation) {
        LatticeSpec spec;
        spec.region.layers = layers;
        const Lattice lat = build_lattice(spec);
        AntiplaneModel apm = make_antiplane(lat, 0.0);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{R_a, rb, rc, 1.0});
        const Blend blend = optimize_beta(mesh, R_a, rb);
        const ApCoupled model = make_ap_coupled(apm, mesh, blend);
        SolverConfig scfg;
        scfg.grad_tol = tol;
        const ApSolve sol = ap_solve_coupled(model, scfg);
        j["u"] = sol.u;
        j["energy"] = sol.energy;
        j["converged"] = sol.stats.converged;
        j["iterations"] = sol.stats.iterations;
        j["dof"] = mesh.n_nodes();
    } else {
        LatticeSpec spec;
        spec.region.layers = layers;
        spec.defect_k = cfg.benchmark == Benchmark::divacancy ? 2 : 11;
        const Lattice lat = build_lattice(spec);
        const AtomisticSystem sys = make_system(lat, pot);
        const Mat2 B = loading_matrix(cfg.benchmark, cfg.loading, t_star);
        const TriMesh mesh = build_graded_mesh(lat, SizeField{R_a, rb, rc, 1.5});
        const Blend blend = optimize_beta(mesh, R_a, rb);
        CoupledModel model = make_model(method_from_name(method), sys, mesh, blend, B);
        SolverConfig scfg;
        scfg.grad_tol = tol;
        const CoupledSolve sol = solve_coupled(model, scfg);
        auto& uu = j["u"] = nlohmann::json::array();
        for (const auto& v : sol.u) uu.push_back({v.x, v.y});
        j["energy"] = sol.energy;
        j["converged"] = sol.stats.converged;
        j["iterations"] = sol.stats.iterations;
        j["dof"] = mesh.n_nodes();
        j["grad_norm"] = sol.stats.grad_norm;
    }

    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream f(out_path, std::ios::binary);
        f << j.dump(2);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_study(const std::string& config_path, const std::string& csv_path) {
    ac::StudyConfig cfg;
    if (!config_path.empty()) cfg = ac::StudyConfig::from_json(read_file(config_path));
    const ac::StudyResult res = ac::convergence_study(cfg);
    ac::write_csv(csv_path, res.rows);
    std::cerr << "reference: " << res.reference_sites << " sites, energy " << res.reference_energy
              << ", truncation check (H1 gap between last two levels) " << res.reference_doubling_h1
              << "\n";
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

int cmd_slopes(const std::string& csv_path, int last_m) {
    const auto rows = ac::reports_from_csv(read_file(csv_path));
    std::map<std::string, std::vector<const ac::ErrorReport*>> by_method;
    for (const auto& r : rows) by_method[r.method].push_back(&r);
    std::cout << "method,slope_h1,slope_w1inf,slope_energy_rel\n";
    for (const auto& [method, rs] : by_method) {
        auto slope_of = [&](auto get) {
            std::vector<std::pair<double, double>> pts;
            for (const auto* r : rs) pts.push_back({static_cast<double>(r->dof), get(*r)});
            return ac::fit_slope(pts, last_m);
        };
        std::cout << method << "," << slope_of([](const ac::ErrorReport& r) { return r.err_h1; })
                  << "," << slope_of([](const ac::ErrorReport& r) { return r.err_w1inf; }) << ","
                  << slope_of([](const ac::ErrorReport& r) { return r.err_energy_rel; }) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice statics benchmarks for blended atomistic/continuum coupling"};
    app.require_subcommand(1);

    auto* audit = app.add_subcommand("audit", "ghost-force audit on the defect-free lattice");
    double audit_ra = 8.0;
    std::vector<long> audit_widths{2, 4, 8};
    bool audit_opt = false;
    audit->add_option("--Ra", audit_ra, "atomistic radius");
    audit->add_option("--K", audit_widths, "blend widths to audit");
    audit->add_flag("--optimized", audit_opt, "use the optimized blend");

    auto* solve = app.add_subcommand("solve", "single coupled solve, JSON output");
    std::string sv_benchmark = "divacancy", sv_method = "BGFC", sv_out;
    double sv_ra = 8.0, sv_tol = 1e-8;
    solve->add_option("--benchmark", sv_benchmark, "divacancy|microcrack|dislocation");
    solve->add_option("--method", sv_method, "ATM|BQCE|BQCF|BGFC");
    solve->add_option("--Ra", sv_ra, "atomistic radius");
    solve->add_option("--tol", sv_tol, "gradient tolerance");
    solve->add_option("-o,--out", sv_out, "output JSON path (stdout when empty)");

    auto* study = app.add_subcommand("study", "convergence study, CSV output");
    std::string st_config, st_csv = "study.csv";
    study->add_option("--config", st_config, "JSON config (defaults to the divacancy benchmark)");
    study->add_option("-o,--out", st_csv, "output CSV path");

    auto* slopes = app.add_subcommand("slopes", "fit log-log slopes of a study CSV");
    std::string sl_csv;
    int sl_last = 0;
    slopes->add_option("csv", sl_csv, "study CSV file")->required();
    slopes->add_option("--last", sl_last, "fit only the last m points (0 = all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(audit)) return cmd_audit(audit_ra, audit_widths, audit_opt);
        if (app.got_subcommand(solve))
            return cmd_solve(sv_benchmark, sv_method, sv_ra, sv_out, sv_tol);
        if (app.got_subcommand(study)) return cmd_study(st_config, st_csv);
        if (app.got_subcommand(slopes)) return cmd_slopes(sl_csv, sl_last);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
