#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coneflow/cone.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/errors.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/radial.hpp"
#include "coneflow/spectral.hpp"

namespace coneflow {

using Json = nlohmann::ordered_json;

// 17 significant digits: enough to round-trip any double.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline Json to_json(const WeightFamily& w) {
    return Json{{"kind", std::string(to_string(w.kind))},
                {"value", w.value},
                {"epsilon", w.epsilon},
                {"exponent", w.exponent}};
}

inline Json to_json(const ProblemParams& P) {
    return Json{{"N", P.N}, {"p", P.p}, {"R0", P.R0}, {"R1", P.R1}, {"weight", to_json(P.weight)}};
}

inline Json to_json(const Field& f) {
    const auto& g = f.grid();
    Json vals = Json::array();
    for (double v : f.values()) vals.push_back(v);
    return Json{{"params", to_json(g.params())}, {"nr", g.nr()}, {"ntheta", g.ntheta()}, {"values", std::move(vals)}};
}

inline Json to_json(const EnergyBreakdown& e) {
    return Json{{"h1_sq", e.h1_sq}, {"nonlinear", e.nonlinear}, {"action", e.action},
                {"nehari_residual", e.nehari_residual}};
}

inline Json to_json(const ConeReport& r) {
    return Json{{"min_value", r.min_value},           {"max_even_defect", r.max_even_defect},
                {"max_monotone_defect", r.max_monotone_defect}, {"boundary_defect", r.boundary_defect},
                {"tau", r.tau},                       {"in_cone", r.in_cone}};
}

inline Json nan_to_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const SpectralResult& s) {
    return Json{{"alpha1", nan_to_null(s.alpha1)},
                {"criterion", nan_to_null(s.criterion)},
                {"iterations", s.iterations},
                {"second_variation_value", nan_to_null(s.second_variation_value)},
                {"inv_r2_value", nan_to_null(s.inv_r2_value)},
                {"crosscheck_ratio", nan_to_null(s.crosscheck_ratio)}};
}

inline WeightFamily weight_from_json(const Json& j) {
    WeightFamily w;
    w.kind = weight_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("value")) w.value = j.at("value").get<double>();
    if (j.contains("epsilon")) w.epsilon = j.at("epsilon").get<double>();
    if (j.contains("exponent")) w.exponent = j.at("exponent").get<double>();
    return w;
}

inline ProblemParams params_from_json(const Json& j) {
    ProblemParams P;
    P.N = j.at("N").get<int>();
    P.p = j.at("p").get<double>();
    P.R0 = j.at("R0").get<double>();
    P.R1 = j.at("R1").get<double>();
    if (j.contains("weight")) P.weight = weight_from_json(j.at("weight"));
    return P;
}

// Inverse of to_json(Field); builds a fresh grid.
inline Field field_from_json(const Json& j) {
    try {
        const auto P = params_from_json(j.at("params"));
        auto g = build_grid(P, j.at("nr").get<int>(), j.at("ntheta").get<int>());
        return Field(g, j.at("values").get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed field document: ") + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw ValidationError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string trace_csv(const FlowTrace& tr) {
    std::string s = "time,action,phi_norm,h1_norm,dt\n";
    for (const auto& x : tr.samples)
        s += fmt17(x.time) + "," + fmt17(x.action) + "," + fmt17(x.phi_norm) + "," + fmt17(x.h1_norm) + "," +
             fmt17(x.dt) + "\n";
    return s;
}

inline std::string radial_csv(const RadialSolution& rad) {
    std::string s = "r,u\n";
    for (std::size_t k = 0; k < rad.size(); ++k) s += fmt17(rad.r_nodes[k]) + "," + fmt17(rad.values[k]) + "\n";
    return s;
}

inline std::string sweep_csv(const SweepResult& res) {
    std::string s = "parameter,alpha1,criterion,status\n";
    for (const auto& r : res.rows)
        s += fmt17(r.parameter) + "," + (r.ok ? fmt17(r.alpha1) : "nan") + "," + (r.ok ? fmt17(r.criterion) : "nan") +
             "," + (r.ok ? "ok" : "failed") + "\n";
    return s;
}

// Rows with status ok from a table written by sweep_csv; malformed lines are skipped.
inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::vector<SweepRow> rows;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line); // header
    while (std::getline(is, line)) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        if (cols.size() != 4 || cols[3] != "ok") continue;
        try {
            SweepRow r;
            r.parameter = std::stod(cols[0]);
            r.alpha1 = std::stod(cols[1]);
            r.criterion = std::stod(cols[2]);
            r.ok = true;
            rows.push_back(r);
        } catch (const std::exception&) {
        }
    }
    return rows;
}

inline Json to_json(const SweepResult& res, const SweepOptions& o) {
    Json samples = Json::array();
    for (const auto& r : res.rows) {
        Json row{{"parameter", r.parameter}, {"ok", r.ok}};
        if (r.ok) {
            row["alpha1"] = r.alpha1;
            row["criterion"] = r.criterion;
        } else {
            row["error"] = r.error;
        }
        samples.push_back(std::move(row));
    }
    return Json{{"mode", std::string(to_string(o.mode))},
                {"fixed", to_json(o.fixed)},
                {"range", {o.lo, o.hi}},
                {"samples", o.samples},
                {"n1d", o.n1d},
                {"threshold", res.threshold ? Json(*res.threshold) : Json(nullptr)},
                {"threshold_bracket", res.threshold ? Json{res.threshold_lo, res.threshold_hi} : Json(nullptr)},
                {"fit_exponent", res.fit_exponent ? Json(*res.fit_exponent) : Json(nullptr)},
                {"fit_window", {res.fit_lo, res.fit_hi}},
                {"fit_points", res.fit_points},
                {"monotone_violations", res.monotone_violations},
                {"failures", res.failures},
                {"per_sample", std::move(samples)}};
}

} // namespace coneflow
