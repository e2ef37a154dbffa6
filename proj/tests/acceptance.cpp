// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coneflow/coneflow.hpp"

using namespace coneflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char b[64];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int workers() { return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency()))); }

Field bump(const GridPtr& g) {
    Field u = Field::from_function(g, [](double r, double t) {
        return std::sin(std::numbers::pi * (r - 1.0)) * (1.0 + std::cos(t) * std::cos(t));
    });
    u.zero_boundary();
    return u;
}

Field radial_bump(const GridPtr& g) {
    Field u = Field::from_function(g, [](double r, double) { return std::sin(std::numbers::pi * (r - 1.0)); });
    u.zero_boundary();
    return u;
}

Field ones(const GridPtr& g) { return make_weight(g, WeightFamily::constant(1.0)); }

// 1. per-step (I_k - I_{k+1}) / dt = ‖Φ_k‖² (1 ± 0.1) for fixed dt ≤ dt0/8, and halving.
Outcome criterion_dissipation() {
    auto g = build_grid(ProblemParams{}, 33, 33);
    OperatorSet ops(g);
    const Field a = ones(g);
    const Field u = bump(g);
    const double tu = nehari_scale(ops, a, 4.0, u);
    const FlowConfig base;
    double worst = 0.0, ratio_lo = 1e300, ratio_hi = 0.0;
    int steps = 0;
    for (double s : {0.8, 1.0, 1.3}) {
        double prev = 0.0;
        for (int div : {8, 16, 32}) {
            FlowConfig cfg = base;
            cfg.dt0 = cfg.dt_min = cfg.dt_max = base.dt0 / div;
            cfg.t_max_time = 4.0;
            const FlowTrace tr = flow(ops, a, 4.0, s * tu * u, cfg);
            double d = 0.0;
            for (std::size_t k = 1; k < tr.samples.size(); ++k) {
                const auto& A = tr.samples[k - 1];
                const auto& B = tr.samples[k];
                const double lhs = (A.action - B.action) / B.dt;
                d = std::max(d, std::abs(lhs / (A.phi_norm * A.phi_norm) - 1.0));
                ++steps;
            }
            worst = std::max(worst, d);
            if (prev > 0.0) {
                ratio_lo = std::min(ratio_lo, prev / d);
                ratio_hi = std::max(ratio_hi, prev / d);
            }
            prev = d;
        }
    }
    Outcome o;
    o.pass = worst <= 0.1 && ratio_lo >= 1.6 && ratio_hi <= 2.4;
    o.detail = "max relative defect " + fmt("%.3e", worst) + " over " + std::to_string(steps) +
               " steps, halving ratios in [" + fmt("%.3f", ratio_lo) + ", " + fmt("%.3f", ratio_hi) + "]";
    return o;
}

// 2. T maps 50 cone samples into the cone for 3 weight families.
Outcome criterion_cone_invariance() {
    const auto t0 = std::chrono::steady_clock::now();
    auto g = build_grid(ProblemParams{}, 33, 33);
    OperatorSet ops(g);
    int bad = 0, total = 0;
    double worst = 0.0;
    for (const auto& w : {WeightFamily::constant(1.0), WeightFamily::radial(1.0, 2.0), WeightFamily::angular(0.5, 2.0)}) {
        const Field a = make_weight(g, w);
        for (const auto& u : sample_cone(g, 2024, 50)) {
            const Field T = apply_T(ops, a, 4.0, u);
            const auto rep = check_cone(T, 1e-8 * T.max_abs());
            worst = std::max({worst, -rep.min_value / T.max_abs(), rep.max_monotone_defect / T.max_abs(),
                              rep.max_even_defect / T.max_abs()});
            bad += !rep.in_cone;
            ++total;
        }
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && secs < 60.0, std::to_string(bad) + " of " + std::to_string(total) +
                                         " outputs outside the cone, worst relative defect " + fmt("%.2e", worst) +
                                         ", " + fmt("%.2f", secs) + " s"};
}

// 3. Converged solutions sit on the Nehari set.
Outcome criterion_nehari() {
    struct Case {
        const char* name;
        double p;
        WeightFamily w;
        bool radial_start;
    };
    const std::vector<Case> cases = {{"p=4 constant", 4.0, WeightFamily::constant(1.0), false},
                                     {"p=4 radial-start", 4.0, WeightFamily::constant(1.0), true},
                                     {"p=3 constant", 3.0, WeightFamily::constant(1.0), false},
                                     {"p=6 constant", 6.0, WeightFamily::constant(1.0), false},
                                     {"p=4 angular", 4.0, WeightFamily::angular(0.5, 2.0), false},
                                     {"p=4 radial weight", 4.0, WeightFamily::radial(1.0, 1.0), false}};
    double worst_res = 0.0, worst_scale = 0.0;
    int converged = 0;
    for (const auto& c : cases) {
        ProblemParams P;
        P.p = c.p;
        P.weight = c.w;
        auto g = build_grid(P, 33, 33);
        OperatorSet ops(g);
        const Field a = make_weight(g, c.w);
        const auto cp = locate_critical_point(ops, a, c.p, c.radial_start ? radial_bump(g) : bump(g), FlowConfig{});
        if (!cp.converged) continue;
        ++converged;
        const auto e = action(ops, a, c.p, cp.u);
        worst_res = std::max(worst_res, std::abs(e.nehari_residual) / e.h1_sq);
        worst_scale = std::max(worst_scale, std::abs(nehari_scale(ops, a, c.p, cp.u) - 1.0));
    }
    return {converged == static_cast<int>(cases.size()) && worst_res <= 1e-8 && worst_scale <= 1e-8,
            std::to_string(converged) + "/" + std::to_string(cases.size()) + " converged, max |I'(u)u|/‖u‖² " +
                fmt("%.2e", worst_res) + ", max |t_u - 1| " + fmt("%.2e", worst_scale)};
}

// 4. Radial-data flow limits against a fine 1D reference.
Outcome criterion_radial_crossvalidation() {
    const ProblemParams P;
    const auto ref = solve_radial(P, 4097);
    std::vector<double> err;
    for (int nr : {17, 33, 65}) {
        auto g = build_grid(P, nr, 9);
        OperatorSet ops(g);
        const auto cp = locate_critical_point(ops, ones(g), 4.0, radial_bump(g), FlowConfig{});
        if (!cp.converged) return {false, "flow limit did not converge at nr=" + std::to_string(nr)};
        double e = 0.0;
        for (int i = 0; i < nr; ++i) {
            const double uref = interpolate_cubic(ref.r_nodes, ref.values, g->r(i));
            for (int j = 0; j < g->ntheta(); ++j) e = std::max(e, std::abs(cp.u(i, j) - uref));
        }
        err.push_back(e);
    }
    const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
    return {o1 >= 1.8 && o2 >= 1.8, "sup errors " + fmt("%.3e", err[0]) + ", " + fmt("%.3e", err[1]) + ", " +
                                        fmt("%.3e", err[2]) + "; orders " + fmt("%.3f", o1) + ", " + fmt("%.3f", o2)};
}

// 5. I''(u_rad)(v, v) = (α₁ + 2N) ∫ v²/r² at n1d = 513, nr = ntheta = 129.
Outcome criterion_spectral_crosscheck() {
    const ProblemParams P;
    const auto rad = solve_radial(P, 513);
    const auto eig = alpha1_solve(rad, 513);
    auto g = build_grid(P, 129, 129);
    OperatorSet ops(g);
    const auto rep = nonradiality_certificate(ops, ones(g), 4.0, rad, eig);
    const double dev = std::abs(rep.crosscheck_ratio - 1.0);
    return {dev <= 0.01, "I''(u_rad)(v,v)=" + fmt("%.6e", rep.second_variation_value) + ", (α₁+2N)∫v²/r²=" +
                             fmt("%.6e", rep.criterion * rep.inv_r2_value) + ", ratio " +
                             fmt("%.6f", rep.crosscheck_ratio) + (rep.radial_refined ? "" : " (u_rad not refined)")};
}

// 6. -α₁ ~ p² over [10, 20].
Outcome criterion_asymptotics_p() {
    SweepOptions o;
    o.mode = SweepMode::vary_p;
    o.lo = 10.0;
    o.hi = 20.0;
    o.samples = 11;
    o.fit_lo = 10.0;
    o.fit_hi = 20.0;
    o.workers = workers();
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = threshold_sweep(o);
    const bool ok = res.fit_exponent && *res.fit_exponent >= 1.6 && *res.fit_exponent <= 2.4;
    return {ok, "exponent " + (res.fit_exponent ? fmt("%.4f", *res.fit_exponent) : std::string("none")) + " from " +
                    std::to_string(res.fit_points) + " points, " + std::to_string(res.failures) + " failures, " +
                    fmt("%.1f", seconds_since(t0)) + " s"};
}

// 7. -α₁ ~ R² over [15, 30] and a sign change of α₁ + 2N.
Outcome criterion_asymptotics_R() {
    SweepOptions o;
    o.mode = SweepMode::vary_R;
    o.fixed.p = 4.0;
    o.fixed.R0 = 1.0;
    o.fixed.R1 = 2.0;
    o.lo = 0.05;
    o.hi = 30.0;
    o.samples = 30;
    o.fit_lo = 15.0;
    o.fit_hi = 30.0;
    o.workers = workers();
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = threshold_sweep(o);
    const bool ok = res.fit_exponent && *res.fit_exponent >= 1.6 && *res.fit_exponent <= 2.4 && res.threshold &&
                    std::isfinite(*res.threshold);
    return {ok, "exponent " + (res.fit_exponent ? fmt("%.4f", *res.fit_exponent) : std::string("none")) +
                    ", criterion sign change at R=" + (res.threshold ? fmt("%.5f", *res.threshold) : std::string("none")) +
                    ", " + fmt("%.1f", seconds_since(t0)) + " s"};
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("coneflow_acceptance_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CONEFLOW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Json load(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return Json::parse(ss.str());
}

// 8. Certificate at p = 4, past the threshold detected by the same command.
Outcome criterion_certificate() {
    const auto d = scratch("certify");
    std::ofstream(d / "config.json") << R"({"problem": {"N": 3, "p": 4.0, "R0": 1.0, "R1": 2.0},
        "grid": {"nr": 33, "ntheta": 33, "n1d": 513},
        "certify": {"threshold_sweep": true, "p_range": [2.1, 3.0], "samples": 10}})";
    const int rc = run_cli("certify-nonradial --config " + (d / "config.json").string() + " --out " + (d / "out").string());
    if (rc != 0) return {false, "certify-nonradial exited " + std::to_string(rc)};
    const Json j = load(d / "out" / "certificate.json");
    const double thr = j["criterion_threshold"].is_number() ? j["criterion_threshold"].get<double>() : kNaN;
    const double Ic = j["candidate_action"], Ir = j["action_rad"];
    const double av = j["candidate_angular_variation"], tol = j["grid_tolerance"];
    const bool ok = std::isfinite(thr) && 4.0 > thr && Ic < Ir - 1e-10 && av > 1e3 * tol;
    return {ok, "threshold p=" + fmt("%.5f", thr) + ", I(candidate)=" + fmt("%.10g", Ic) + " vs I(u_rad)=" +
                    fmt("%.10g", Ir) + ", angular variation " + fmt("%.4g", av) + " vs grid tolerance " +
                    fmt("%.3g", tol) + ", verdict " + j["verdict"].get<std::string>()};
}

// 9. Structural suites through the CLI at nr = ntheta = 33.
Outcome criterion_verify() {
    const auto d = scratch("verify");
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = run_cli("verify --out " + d.string());
    const double secs = seconds_since(t0);
    int passed = 0, total = 0;
    std::string failed;
    const Json report = fs::exists(d / "verify.json") ? load(d / "verify.json") : Json::object();
    if (report.contains("suites"))
        for (const auto& s : report["suites"]) {
            ++total;
            if (s["passed"].get<bool>())
                ++passed;
            else
                failed += " " + s["name"].get<std::string>();
        }
    return {rc == 0 && secs < 60.0 && total > 0 && passed == total,
            "exit " + std::to_string(rc) + ", " + std::to_string(passed) + "/" + std::to_string(total) +
                " suites passed in " + fmt("%.2f", secs) + " s" + (failed.empty() ? "" : ", failed:" + failed)};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"dissipation identity", criterion_dissipation},
        {"cone invariance of T", criterion_cone_invariance},
        {"fixed-point/Nehari consistency", criterion_nehari},
        {"radial cross-validation", criterion_radial_crossvalidation},
        {"spectral cross-check", criterion_spectral_crosscheck},
        {"quadratic asymptotics in p", criterion_asymptotics_p},
        {"quadratic asymptotics in R", criterion_asymptotics_R},
        {"symmetry-breaking certificate", criterion_certificate},
        {"structural suites", criterion_verify},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
