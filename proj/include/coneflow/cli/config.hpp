#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "coneflow/errors.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/io.hpp"
#include "coneflow/params.hpp"
#include "coneflow/spectral.hpp"
#include "coneflow/verify.hpp"

namespace coneflow::cli {

enum class InitialGuess { bump, radial_bump, sample, lifted_radial };

inline InitialGuess initial_guess_from_string(const std::string& s) {
    if (s == "bump") return InitialGuess::bump;
    if (s == "radial-bump") return InitialGuess::radial_bump;
    if (s == "sample") return InitialGuess::sample;
    if (s == "lifted-radial") return InitialGuess::lifted_radial;
    throw ValidationError("solve.initial must be one of bump, radial-bump, sample, lifted-radial (got '" + s + "')");
}

struct RunConfig {
    ProblemParams problem{};
    int nr = 33;
    int ntheta = 33;
    int n1d = 513;
    FlowConfig flow{};
    double bisect_tol = 1e-12;
    double newton_tol = 1e-10;
    double radial_tol = 1e-10;
    InitialGuess initial = InitialGuess::bump;
    int rounds = 4;
    // certify-nonradial: optional criterion-threshold sweep in p
    bool certify_sweep = true;
    double certify_lo = 2.1;
    double certify_hi = 3.0;
    int certify_samples = 10;
    // sweep
    SweepMode sweep_mode = SweepMode::vary_p;
    double sweep_lo = 3.0;
    double sweep_hi = 20.0;
    int sweep_samples = 18;
    double fit_lo = kNaN;
    double fit_hi = kNaN;
    // verify (nullopt = every suite)
    std::optional<std::vector<std::string>> suites;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string output_dir = "out";
};

namespace detail {

inline void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ValidationError("config: unknown key '" + where + "." + it.key() + "'");
    }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
    }
}

inline void read_range(const Json& j, const char* key, double& lo, double& hi, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    const Json& r = j.at(key);
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
        throw ValidationError("config: '" + where + "." + key + "' must be a pair [lo, hi]");
    lo = r[0].get<double>();
    hi = r[1].get<double>();
}

inline void positive(double v, const char* name) {
    CONEFLOW_REQUIRE(std::isfinite(v) && v > 0.0, std::string("config: ") + name + " must be positive");
}

} // namespace detail

// Every constraint is checked here, before any computation starts.
inline void validate(const RunConfig& c) {
    c.problem.validate();
    CONEFLOW_REQUIRE(c.nr >= 3, "config: grid.nr must be >= 3");
    CONEFLOW_REQUIRE(c.ntheta >= 3 && c.ntheta % 2 == 1, "config: grid.ntheta must be odd and >= 3");
    CONEFLOW_REQUIRE(c.n1d >= 16, "config: grid.n1d must be >= 16");
    c.flow.validate();
    detail::positive(c.bisect_tol, "tolerances.bisect");
    detail::positive(c.newton_tol, "tolerances.newton");
    detail::positive(c.radial_tol, "tolerances.radial");
    CONEFLOW_REQUIRE(c.rounds >= 1, "config: solve.rounds must be >= 1");
    CONEFLOW_REQUIRE(c.certify_samples >= 1, "config: certify.samples must be >= 1");
    CONEFLOW_REQUIRE(c.certify_lo > 2.0 && c.certify_lo <= c.certify_hi, "config: certify.p_range must satisfy 2 < lo <= hi");
    CONEFLOW_REQUIRE(c.workers >= 1, "config: workers must be >= 1");
    CONEFLOW_REQUIRE(!c.output_dir.empty(), "config: output_dir must not be empty");
    if (c.suites) {
        const auto names = all_suite_names();
        for (const auto& s : *c.suites)
            CONEFLOW_REQUIRE(std::find(names.begin(), names.end(), s) != names.end(),
                             "config: unknown verification suite '" + s + "'");
    }
    // Make sure a weight family is realizable before a grid is built from it.
    make_weight(build_grid(c.problem, 3, 3), c.problem.weight);
}

inline RunConfig parse_config(const Json& j) {
    using detail::allow_keys;
    using detail::read;
    RunConfig c;
    allow_keys(j, "config",
               {"problem", "grid", "flow", "tolerances", "solve", "certify", "sweep", "verify", "seed", "workers",
                "output_dir"});
    if (j.contains("problem")) {
        const Json& p = j.at("problem");
        allow_keys(p, "problem", {"N", "p", "R0", "R1", "weight"});
        read(p, "N", c.problem.N, "problem");
        read(p, "p", c.problem.p, "problem");
        read(p, "R0", c.problem.R0, "problem");
        read(p, "R1", c.problem.R1, "problem");
        if (p.contains("weight")) {
            const Json& w = p.at("weight");
            allow_keys(w, "problem.weight", {"kind", "value", "epsilon", "exponent"});
            std::string kind = "constant";
            read(w, "kind", kind, "problem.weight");
            c.problem.weight.kind = weight_kind_from_string(kind);
            read(w, "value", c.problem.weight.value, "problem.weight");
            read(w, "epsilon", c.problem.weight.epsilon, "problem.weight");
            read(w, "exponent", c.problem.weight.exponent, "problem.weight");
        }
    }
    if (j.contains("grid")) {
        const Json& g = j.at("grid");
        allow_keys(g, "grid", {"nr", "ntheta", "n1d"});
        read(g, "nr", c.nr, "grid");
        read(g, "ntheta", c.ntheta, "grid");
        read(g, "n1d", c.n1d, "grid");
    }
    if (j.contains("flow")) {
        const Json& f = j.at("flow");
        allow_keys(f, "flow",
                   {"dt0", "dt_min", "dt_max", "phi_tol", "alpha", "rho_alpha", "t_max_time", "max_steps",
                    "decay_action_floor", "cone_rel_tol", "cg_tol"});
        read(f, "dt0", c.flow.dt0, "flow");
        read(f, "dt_min", c.flow.dt_min, "flow");
        read(f, "dt_max", c.flow.dt_max, "flow");
        read(f, "phi_tol", c.flow.phi_tol, "flow");
        read(f, "alpha", c.flow.alpha, "flow");
        read(f, "rho_alpha", c.flow.rho_alpha, "flow");
        read(f, "t_max_time", c.flow.t_max_time, "flow");
        read(f, "max_steps", c.flow.max_steps, "flow");
        read(f, "decay_action_floor", c.flow.decay_action_floor, "flow");
        read(f, "cone_rel_tol", c.flow.cone_rel_tol, "flow");
        read(f, "cg_tol", c.flow.cg_tol, "flow");
    }
    if (j.contains("tolerances")) {
        const Json& t = j.at("tolerances");
        allow_keys(t, "tolerances", {"bisect", "newton", "radial"});
        read(t, "bisect", c.bisect_tol, "tolerances");
        read(t, "newton", c.newton_tol, "tolerances");
        read(t, "radial", c.radial_tol, "tolerances");
    }
    if (j.contains("solve")) {
        const Json& s = j.at("solve");
        allow_keys(s, "solve", {"initial", "rounds"});
        std::string init = "bump";
        read(s, "initial", init, "solve");
        c.initial = initial_guess_from_string(init);
        read(s, "rounds", c.rounds, "solve");
    }
    if (j.contains("certify")) {
        const Json& s = j.at("certify");
        allow_keys(s, "certify", {"threshold_sweep", "p_range", "samples"});
        read(s, "threshold_sweep", c.certify_sweep, "certify");
        detail::read_range(s, "p_range", c.certify_lo, c.certify_hi, "certify");
        read(s, "samples", c.certify_samples, "certify");
    }
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        allow_keys(s, "sweep", {"mode", "range", "samples", "fit_window"});
        std::string mode = "vary_p";
        read(s, "mode", mode, "sweep");
        c.sweep_mode = sweep_mode_from_string(mode);
        detail::read_range(s, "range", c.sweep_lo, c.sweep_hi, "sweep");
        read(s, "samples", c.sweep_samples, "sweep");
        detail::read_range(s, "fit_window", c.fit_lo, c.fit_hi, "sweep");
    }
    if (j.contains("verify")) {
        const Json& v = j.at("verify");
        allow_keys(v, "verify", {"suites"});
        if (v.contains("suites")) {
            std::vector<std::string> names;
            read(v, "suites", names, "verify");
            c.suites = names;
        }
    }
    read(j, "seed", c.seed, "config");
    read(j, "workers", c.workers, "config");
    read(j, "output_dir", c.output_dir, "config");
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

inline SweepOptions sweep_options(const RunConfig& c) {
    SweepOptions o;
    o.mode = c.sweep_mode;
    o.fixed = c.problem;
    o.lo = c.sweep_lo;
    o.hi = c.sweep_hi;
    o.samples = c.sweep_samples;
    o.n1d = c.n1d;
    o.radial_tol = c.radial_tol;
    o.workers = c.workers;
    o.fit_lo = c.fit_lo;
    o.fit_hi = c.fit_hi;
    return o;
}

inline void ensure_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto probe = dir / ".write_probe";
    {
        std::ofstream os(probe);
        if (!os) throw ValidationError("output directory '" + dir.string() + "' is not writable");
    }
    std::filesystem::remove(probe, ec);
}

} // namespace coneflow::cli
