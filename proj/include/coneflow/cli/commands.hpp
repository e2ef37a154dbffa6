#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "coneflow/cli/config.hpp"
#include "coneflow/cone.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/errors.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/io.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/radial.hpp"
#include "coneflow/spectral.hpp"
#include "coneflow/verify.hpp"

namespace coneflow::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kSolver = 3, kVerification = 4 };

struct CommandOptions {
    std::optional<std::vector<std::string>> suites; // --suite, overrides the config list
    std::string fault;                              // --fault-inject
    bool resume = false;                            // sweep --resume
    bool dump_matrix = false;                       // solve --dump-matrix
};

struct SolveRecord {
    GridPtr grid;
    Field u;
    EnergyBreakdown energy;
    ConeReport cone;
    CriticalPointResult critical;
    FlowConfig flow;
    double phi_norm = 0.0;
    double angular_variation = 0.0;
    double nehari_relative = 0.0;
};

inline Field initial_direction(const RunConfig& c, const GridPtr& g) {
    const double R0 = c.problem.R0, width = c.problem.R1 - c.problem.R0;
    auto radial = [&](double r) { return std::sin(std::numbers::pi * (r - R0) / width); };
    Field psi(g);
    switch (c.initial) {
    case InitialGuess::bump:
        psi = Field::from_function(g, [&](double r, double t) { return radial(r) * (1.0 + std::cos(t) * std::cos(t)); });
        break;
    case InitialGuess::radial_bump:
        psi = Field::from_function(g, [&](double r, double) { return radial(r); });
        break;
    case InitialGuess::sample:
        psi = sample_cone(g, c.seed, 1).front();
        break;
    case InitialGuess::lifted_radial: {
        ProblemParams P = c.problem;
        P.weight = WeightFamily::constant(1.0);
        psi = lift_radial(g, solve_radial(P, c.n1d, c.radial_tol));
        break;
    }
    }
    psi.zero_boundary();
    return psi;
}

// Separatrix search, Newton polish, and the checks every solution record must pass.
inline SolveRecord run_solve(const RunConfig& c) {
    SolveRecord rec;
    rec.grid = build_grid(c.problem, c.nr, c.ntheta);
    const OperatorSet ops(rec.grid);
    const Field a = make_weight(rec.grid, c.problem.weight);
    const double p = c.problem.p;
    rec.flow = c.flow;
    if (rec.flow.alpha <= 0.0 || rec.flow.rho_alpha <= 0.0) {
        const auto geo = mountain_pass_geometry(ops, a, p, c.seed);
        if (rec.flow.alpha <= 0.0) rec.flow.alpha = geo.alpha;
        if (rec.flow.rho_alpha <= 0.0) rec.flow.rho_alpha = geo.rho_alpha;
    }
    CriticalPointOptions opt;
    opt.bisect_tol = c.bisect_tol;
    opt.rounds = c.rounds;
    opt.newton_tol = c.newton_tol;
    rec.critical = locate_critical_point(ops, a, p, initial_direction(c, rec.grid), rec.flow, opt);
    if (!rec.critical.converged)
        throw SolverError("solve: no fixed point found after " + std::to_string(rec.critical.rounds) +
                              " separatrix rounds (" + rec.critical.refine.warning + ")",
                          rec.critical.separatrix.witness.best_phi);
    rec.u = rec.critical.u;
    rec.energy = action(ops, a, p, rec.u);
    rec.cone = check_cone(rec.u, default_cone_tau(rec.u));
    rec.phi_norm = rec.critical.refine.phi_history.back();
    rec.angular_variation = angular_variation(rec.u);
    rec.nehari_relative = rec.energy.nehari_residual / rec.energy.h1_sq;
    if (!rec.cone.in_cone) throw SolverError("solve: converged field fails the cone check: " + describe(rec.cone));
    return rec;
}

inline Json solve_json(const RunConfig& c, const SolveRecord& r) {
    const auto& sep = r.critical.separatrix;
    Json probes = Json::array();
    for (const auto& pr : sep.probes)
        probes.push_back(Json{{"t", pr.t}, {"outcome", std::string(to_string(pr.outcome))}, {"lower_side", pr.lower_side}});
    return Json{{"command", "solve"},
                {"params", to_json(c.problem)},
                {"grid", {{"nr", c.nr}, {"ntheta", c.ntheta}}},
                {"seed", c.seed},
                {"energy", to_json(r.energy)},
                {"cone", to_json(r.cone)},
                {"nehari_residual", r.energy.nehari_residual},
                {"nehari_relative", r.nehari_relative},
                {"phi_norm", r.phi_norm},
                {"angular_variation", r.angular_variation},
                {"flow",
                 {{"alpha", r.flow.alpha},
                  {"rho_alpha", r.flow.rho_alpha},
                  {"rounds", r.critical.rounds},
                  {"t_star", sep.t_star},
                  {"bracket", {sep.t_lo, sep.t_hi}},
                  {"witness_outcome", std::string(to_string(sep.witness.outcome))},
                  {"witness_best_phi", sep.witness.best_phi},
                  {"probes", std::move(probes)}}},
                {"refine",
                 {{"converged", r.critical.refine.converged},
                  {"iterations", r.critical.refine.iterations},
                  {"phi_history", r.critical.refine.phi_history}}}};
}

inline int cmd_solve(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
    const std::filesystem::path out = c.output_dir;
    const SolveRecord r = run_solve(c);
    write_json(out / "solution.json", solve_json(c, r));
    write_json(out / "field.json", to_json(r.u));
    write_text(out / "trace.csv", trace_csv(r.critical.separatrix.witness));
    if (o.dump_matrix) {
        std::ofstream os(out / "matrix.txt");
        OperatorSet(r.grid).dump_triplets(os);
    }
    log << "solve: I=" << fmt17(r.energy.action) << " ‖u‖²=" << fmt17(r.energy.h1_sq)
        << " nehari_rel=" << fmt17(r.nehari_relative) << " phi=" << fmt17(r.phi_norm)
        << " angular_variation=" << fmt17(r.angular_variation) << "\n";
    return kOk;
}

inline int cmd_certify_nonradial(const RunConfig& c, const CommandOptions&, std::ostream& log) {
    if (!c.problem.weight.is_unit_constant())
        throw ValidationError("certify-nonradial: the spectral criterion assumes a ≡ 1 (constant weight, value 1)");
    const std::filesystem::path out = c.output_dir;
    const double p = c.problem.p;

    Json sweep_j = nullptr;
    std::optional<double> threshold;
    if (c.certify_sweep) {
        SweepOptions so;
        so.mode = SweepMode::vary_p;
        so.fixed = c.problem;
        so.lo = c.certify_lo;
        so.hi = c.certify_hi;
        so.samples = c.certify_samples;
        so.n1d = c.n1d;
        so.radial_tol = c.radial_tol;
        so.workers = c.workers;
        const auto sr = threshold_sweep(so);
        threshold = sr.threshold;
        sweep_j = to_json(sr, so);
    }

    const auto rad = solve_radial(c.problem, c.n1d, c.radial_tol);
    write_text(out / "radial.csv", radial_csv(rad));
    const auto eig = alpha1_solve(rad, c.n1d);
    auto grid = build_grid(c.problem, c.nr, c.ntheta);
    const OperatorSet ops(grid);
    const Field a = make_weight(grid, c.problem.weight);
    const CertificateReport cert = nonradiality_certificate(ops, a, p, rad, eig);

    const SolveRecord sol = run_solve(c);
    const double tau = default_cone_tau(sol.u);
    const double cand_action = sol.energy.action;
    const bool below = cand_action < cert.action_rad - 1e-10;
    const bool varies = sol.angular_variation > 1e3 * tau;
    const double dist_rad = (sol.u - cert.u_rad).max_abs() / cert.u_rad.max_abs();
    const bool claim = cert.competitor_found && varies;

    Json j{{"command", "certify-nonradial"},
           {"params", to_json(c.problem)},
           {"grid", {{"nr", c.nr}, {"ntheta", c.ntheta}, {"n1d", c.n1d}}},
           {"alpha1", cert.alpha1},
           {"criterion", cert.criterion},
           {"criterion_threshold", threshold ? Json(*threshold) : Json(nullptr)},
           {"second_variation", cert.second_variation_value},
           {"inv_r2", cert.inv_r2_value},
           {"crosscheck_ratio", cert.crosscheck_ratio},
           {"action_rad", cert.action_rad},
           {"competitor_found", cert.competitor_found},
           {"competitor_action", nan_to_null(cert.competitor_action)},
           {"competitor_s", nan_to_null(cert.competitor_s)},
           {"candidate_action", cand_action},
           {"candidate_below_radial", below},
           {"candidate_angular_variation", sol.angular_variation},
           {"grid_tolerance", tau},
           {"candidate_radial_distance", dist_rad},
           {"nonradial_expected", cert.nonradial_expected},
           {"nonradial_certified", claim},
           {"verdict", claim ? "nonradial" : "no certificate"},
           {"sweep", std::move(sweep_j)}};
    write_json(out / "certificate.json", j);
    write_json(out / "candidate.json", to_json(sol.u));
    log << "certify-nonradial: α₁=" << fmt17(cert.alpha1) << " α₁+2N=" << fmt17(cert.criterion)
        << " I(u_rad)=" << fmt17(cert.action_rad) << " I(candidate)=" << fmt17(cand_action)
        << " verdict=" << (claim ? "nonradial" : "no certificate") << "\n";
    return kOk;
}

inline int cmd_verify(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
    VerifyContext ctx;
    ctx.params = c.problem;
    ctx.nr = c.nr;
    ctx.ntheta = c.ntheta;
    ctx.n1d = c.n1d;
    ctx.seed = c.seed;
    if (!o.fault.empty()) {
        if (o.fault != "angular_flux_sign")
            throw ValidationError("unknown fault '" + o.fault + "' (supported: angular_flux_sign)");
        ctx.assembly.flip_angular_flux = true;
    }
    std::vector<std::string> names = all_suite_names();
    if (c.suites) names = *c.suites;
    if (o.suites) {
        names.clear();
        for (const auto& s : *o.suites)
            if (!s.empty()) names.push_back(s);
    }
    if (names.empty()) {
        std::cerr << "warning: no verification suites selected; nothing to run\n";
        write_json(std::filesystem::path(c.output_dir) / "verify.json",
                   Json{{"command", "verify"}, {"suites", Json::array()}, {"passed", true}});
        return kOk;
    }
    const auto results = run_suites(ctx, names);
    Json arr = Json::array();
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        log << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
        arr.push_back(Json{{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    }
    write_json(std::filesystem::path(c.output_dir) / "verify.json",
               Json{{"command", "verify"},
                    {"fault", o.fault.empty() ? Json(nullptr) : Json(o.fault)},
                    {"suites", std::move(arr)},
                    {"passed", all}});
    if (!all) {
        std::string failed;
        for (const auto& r : results)
            if (!r.passed) failed += (failed.empty() ? "" : ", ") + r.name;
        std::cerr << "verification failed: " << failed << "\n";
        return kVerification;
    }
    return kOk;
}

inline int cmd_sweep(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
    const SweepOptions so = sweep_options(c);
    validate(so);
    const std::filesystem::path out = c.output_dir;
    std::vector<SweepRow> known;
    if (o.resume && std::filesystem::exists(out / "sweep.csv")) known = parse_sweep_csv(read_text(out / "sweep.csv"));
    const SweepResult res = threshold_sweep(so, known);
    write_text(out / "sweep.csv", sweep_csv(res));
    write_json(out / "sweep_summary.json", to_json(res, so));
    const int ok = static_cast<int>(res.rows.size()) - res.failures;
    log << "sweep " << to_string(so.mode) << ": " << ok << "/" << res.rows.size() << " samples ok";
    if (res.fit_exponent) log << ", fit exponent " << fmt17(*res.fit_exponent);
    if (res.threshold) log << ", criterion threshold " << fmt17(*res.threshold);
    log << "\n";
    if (5 * ok < 4 * static_cast<int>(res.rows.size())) {
        std::cerr << "sweep: only " << ok << " of " << res.rows.size() << " samples succeeded\n";
        return kSolver;
    }
    return kOk;
}

} // namespace coneflow::cli
