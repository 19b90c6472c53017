#ifndef AC_STUDY_HPP
#define AC_STUDY_HPP

#include <string>
#include <utility>
#include <vector>

#include "ac/antiplane.hpp"
#include "ac/atomistic.hpp"
#include "ac/coupling.hpp"

// Benchmark harness: error norms against the truncated atomistic reference,
// ghost-force audits, convergence studies over increasing atomistic radii,
// log-log slope fitting and the CSV report format.

namespace ac {

struct ErrorReport {
    std::string method;
    double R_a = 0.0;
    double K_blend = 0.0;
    long dof = 0;
    double err_h1 = 0.0;
    double err_w1inf = 0.0;
    double err_energy_abs = 0.0;
    double err_energy_rel = 0.0;
    double wall_time_s = 0.0;
};

// CSV schema (exact column order)
extern const char* kCsvHeader;

std::string reports_to_csv(const std::vector<ErrorReport>& rows);
void write_csv(const std::string& path, const std::vector<ErrorReport>& rows);
std::vector<ErrorReport> reports_from_csv(const std::string& text);

struct ErrorNorms {
    double h1 = 0.0;
    double w1inf = 0.0;
};

// Gradient error norms on the micro-triangulation of `ref_lat`, restricted to
// barycenters in the annulus r_excl < |x - center| <= r_outer.
ErrorNorms error_norms(const Lattice& ref_lat, const Displacement& u_ref,
                       const Displacement& u_other, const Vec2& center, double r_outer,
                       double r_excl);
ErrorNorms error_norms_scalar(const Lattice& ref_lat, const ScalarField& u_ref,
                              const ScalarField& u_other, const Vec2& center, double r_outer,
                              double r_excl);

double error_h1(const Lattice& ref_lat, const Displacement& u_ref, const Displacement& u_other,
                const Vec2& center, double r_outer, double r_excl);
double error_w1inf(const Lattice& ref_lat, const Displacement& u_ref, const Displacement& u_other,
                   const Vec2& center, double r_outer, double r_excl);

// abs = |E_ref - E_h|, rel = abs / max(|E_ref|, 1e-30)
std::pair<double, double> error_energy(double E_ref, double E_h);

// Least-squares slope of log(err) vs log(DOF) over the last m points (0 = all).
double fit_slope(const std::vector<std::pair<double, double>>& points, int last_m = 0);

enum class Benchmark { divacancy, microcrack, dislocation };

const char* benchmark_name(Benchmark b);
Benchmark benchmark_from_name(const std::string& name);

struct Loading {
    double s = 0.03;
    double gamma_I = 0.03;
    double gamma_II = 0.03;
};

struct StudyConfig {
    Benchmark benchmark = Benchmark::divacancy;
    std::vector<Method> methods = {Method::BGFC, Method::BQCF, Method::BQCE};
    std::vector<double> sizes = {4, 8, 16, 32};
    enum class BlendRule { cuberoot, proportional } blend_rule = BlendRule::cuberoot;
    Loading loading;
    double ref_tol = 1e-6;
    double solve_tol = 1e-8;
    bool optimized_blend = true;
    bool record_timings = true;

    static StudyConfig from_json(const std::string& text);
    std::string to_json() const;
};

long blend_width(StudyConfig::BlendRule rule, double R_a);

// Loading matrix: the benchmark strain pattern times the equilibrium F_0.
Mat2 loading_matrix(Benchmark b, const Loading& l, double t_star);

struct StudyResult {
    std::vector<ErrorReport> rows;
    double reference_energy = 0.0;
    double reference_doubling_h1 = 0.0;  // H1 gap between last two truncation levels
    long reference_sites = 0;
};

StudyResult convergence_study(const StudyConfig& cfg);

// Reference solve with free-radius continuation (warm starts from nested
// truncations).  doubling_h1 reports the H1 gap between the last two levels.
Displacement solve_reference_continuation(LoadedProblem& prob, double final_radius, double tol,
                                          double* doubling_h1);
ScalarField ap_reference_continuation(AntiplaneModel& m, double final_radius, double tol,
                                      double* doubling_h1);

// Ghost-force audit: residual infinity norm at zero displacement on the
// defect-free lattice under B = F_0.
double ghost_audit(CoupledModel& model);

// Convenience: assemble a defect-free audit instance and return the residual.
double ghost_audit_instance(Method kind, double R_a, long K_blend, bool optimized_blend = false);

}  // namespace ac

#endif
