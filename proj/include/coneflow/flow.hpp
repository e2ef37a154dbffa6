#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "coneflow/cone.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/resolvent.hpp"

namespace coneflow {

struct FlowConfig {
    double dt0 = 0.25;
    double dt_min = 1e-6;
    double dt_max = 1.0; // Euler steps stay convex combinations of η and T(η) only for dt ≤ 1
    double phi_tol = 1e-8;
    double alpha = 0.0;     // ≤ 0: derived from the sample set, see mountain_pass_geometry
    double rho_alpha = 0.0; // ≤ 0: derived together with alpha
    double t_max_time = 200.0;
    int max_steps = 20000;
    double decay_action_floor = -1.0;
    double cone_rel_tol = 1e-8;
    double cg_tol = kDefaultCgTol;

    void validate() const {
        CONEFLOW_REQUIRE(dt_min > 0.0 && dt_min <= dt0 && dt0 <= dt_max,
                         "flow: need 0 < dt_min <= dt0 <= dt_max (got dt_min=" + std::to_string(dt_min) +
                             ", dt0=" + std::to_string(dt0) + ", dt_max=" + std::to_string(dt_max) + ")");
        CONEFLOW_REQUIRE(dt_max <= 1.0, "flow: dt_max must be <= 1 so that Euler steps preserve the cone");
        CONEFLOW_REQUIRE(phi_tol > 0.0, "flow: phi_tol must be positive");
        CONEFLOW_REQUIRE(t_max_time > 0.0, "flow: t_max_time must be positive");
        CONEFLOW_REQUIRE(max_steps > 0, "flow: max_steps must be positive");
        CONEFLOW_REQUIRE(cone_rel_tol >= 0.0, "flow: cone_rel_tol must be >= 0");
        CONEFLOW_REQUIRE(cg_tol > 0.0 && cg_tol < 1.0, "flow: cg_tol must lie in (0, 1)");
    }
};

enum class FlowOutcome { converged_fixed_point, decayed_to_zero, escaped_negative, budget_exhausted };

inline std::string_view to_string(FlowOutcome o) {
    switch (o) {
    case FlowOutcome::converged_fixed_point: return "converged_fixed_point";
    case FlowOutcome::decayed_to_zero: return "decayed_to_zero";
    case FlowOutcome::escaped_negative: return "escaped_negative";
    case FlowOutcome::budget_exhausted: return "budget_exhausted";
    }
    return "unknown";
}

struct FlowSample {
    double time = 0.0;
    double action = 0.0;
    double phi_norm = 0.0; // ‖Φ(η)‖ at this iterate
    double h1_norm = 0.0;
    double dt = 0.0; // step that produced this iterate (0 for the initial one)
};

struct FlowTrace {
    std::vector<FlowSample> samples;
    FlowOutcome outcome = FlowOutcome::budget_exhausted;
    Field final;
    Field best; // iterate with the smallest ‖Φ‖
    double best_phi = std::numeric_limits<double>::infinity();
    int accepted = 0;
    int rejected = 0;
    bool stalled = false;
    std::string message;
};

struct MountainPassGeometry {
    double alpha = 0.0;
    double rho_alpha = 0.0;
};

// α: largest radius at which the p-homogeneous part is ≤ 10% of the quadratic part on
// every sample direction; ρ̂_α: half the smallest sampled action on the sphere of radius α.
inline MountainPassGeometry mountain_pass_geometry(const OperatorSet& ops, const Field& a, double p,
                                                   std::uint64_t seed = 0x5eed, int samples = 64) {
    const auto dirs = sample_cone(ops.grid_ptr(), seed, samples);
    std::vector<double> b(dirs.size());
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        const double n = std::sqrt(h1_norm_sq(ops, dirs[s]));
        b[s] = nonlinear_integral(a, p, (1.0 / n) * dirs[s]);
        alpha = std::min(alpha, std::pow(0.05 * p / b[s], 1.0 / (p - 2.0)));
    }
    double rho = std::numeric_limits<double>::infinity();
    for (double bs : b) rho = std::min(rho, 0.5 * alpha * alpha - std::pow(alpha, p) * bs / p);
    return {alpha, 0.5 * rho};
}

inline FlowConfig resolve_geometry(const OperatorSet& ops, const Field& a, double p, FlowConfig cfg) {
    if (cfg.alpha <= 0.0 || cfg.rho_alpha <= 0.0) {
        const auto g = mountain_pass_geometry(ops, a, p);
        if (cfg.alpha <= 0.0) cfg.alpha = g.alpha;
        if (cfg.rho_alpha <= 0.0) cfg.rho_alpha = g.rho_alpha;
    }
    return cfg;
}

// Explicit Euler for dη/dt = -(η - T(η)) with acceptance by action decrease.
inline FlowTrace flow(const OperatorSet& ops, const Field& a, double p, const Field& u0, FlowConfig cfg) {
    cfg.validate();
    cfg = resolve_geometry(ops, a, p, cfg);
    CONEFLOW_REQUIRE(u0.all_finite(), "flow: initial datum is not finite");
    {
        const auto rep = check_cone(u0, cfg.cone_rel_tol * u0.max_abs());
        if (!rep.in_cone) throw ValidationError("flow: initial datum is not in the cone: " + describe(rep));
    }

    FlowTrace tr;
    Field eta = u0;
    Field Teta = apply_T(ops, a, p, eta, nullptr, cfg.cg_tol);
    Field phi = eta - Teta;
    double phin = std::sqrt(std::max(0.0, ops.stiffness_form(phi, phi)));
    EnergyBreakdown e = action(ops, a, p, eta);
    double time = 0.0;
    double dt = cfg.dt0;
    tr.samples.push_back({time, e.action, phin, std::sqrt(e.h1_sq), 0.0});
    tr.best = eta;
    tr.best_phi = phin;

    while (true) {
        if (phin <= cfg.phi_tol) {
            tr.outcome = FlowOutcome::converged_fixed_point;
            break;
        }
        if (std::sqrt(e.h1_sq) < cfg.alpha && e.action < cfg.rho_alpha) {
            tr.outcome = FlowOutcome::decayed_to_zero;
            break;
        }
        if (e.action < cfg.decay_action_floor) {
            tr.outcome = FlowOutcome::escaped_negative;
            break;
        }
        if (time >= cfg.t_max_time || tr.accepted >= cfg.max_steps) {
            tr.outcome = FlowOutcome::budget_exhausted;
            tr.message = "flow-time or step budget exhausted";
            break;
        }

        // Evenness in θ is exact for the continuous flow but only holds to rounding in the
        // discrete one, and odd modes can be linearly unstable near a radial fixed point;
        // averaging with the mirror image removes that rounding drift.
        Field trial = eta;
        trial.axpy(-dt, phi);
        trial = symmetrize_theta(trial);
        if (!trial.all_finite())
            throw SolverError("flow: non-finite iterate after " + std::to_string(tr.accepted) + " steps at t=" +
                                  std::to_string(time),
                              phin);
        // Any Euler step with dt ≤ 1 is a convex combination of cone members, so a violation
        // beyond tolerance is a genuine failure. Below tolerance the residue is rounding; it is
        // projected away because near an unstable radial state it would otherwise be amplified.
        const auto rep = check_cone(trial, cfg.cone_rel_tol * trial.max_abs());
        if (!rep.in_cone)
            throw SolverError("flow: iterate left the cone at t=" + std::to_string(time + dt) + ": " + describe(rep),
                              phin);
        trial = project_cone(trial);

        const EnergyBreakdown et = action(ops, a, p, trial);
        if (!(et.action < e.action)) {
            ++tr.rejected;
            if (dt <= cfg.dt_min) {
                tr.outcome = FlowOutcome::budget_exhausted;
                tr.stalled = true;
                tr.message = "step rejected at dt_min (action no longer decreases)";
                break;
            }
            dt = std::max(0.5 * dt, cfg.dt_min);
            continue;
        }

        eta = std::move(trial);
        e = et;
        time += dt;
        ++tr.accepted;
        Teta = apply_T(ops, a, p, eta, &Teta, cfg.cg_tol);
        phi = eta - Teta;
        phin = std::sqrt(std::max(0.0, ops.stiffness_form(phi, phi)));
        tr.samples.push_back({time, e.action, phin, std::sqrt(e.h1_sq), dt});
        if (phin < tr.best_phi) {
            tr.best_phi = phin;
            tr.best = eta;
        }
        dt = std::min(1.2 * dt, cfg.dt_max);
    }
    tr.final = std::move(eta);
    return tr;
}

struct ProbeRecord {
    double t = 0.0;
    FlowOutcome outcome = FlowOutcome::budget_exhausted;
    bool lower_side = false; // classified as lying in the basin of 0
};

struct SeparatrixResult {
    double t_star = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    FlowTrace witness;
    std::vector<ProbeRecord> probes;
};

namespace detail {

// Which side of the separatrix a trajectory ended on. Unfinished trajectories are
// classified by the sign of I'(η)η: positive means the flow heads towards 0.
inline bool lower_side(const OperatorSet& ops, const Field& a, double p, const FlowTrace& tr) {
    switch (tr.outcome) {
    case FlowOutcome::decayed_to_zero: return true;
    case FlowOutcome::escaped_negative: return false;
    default: return action(ops, a, p, tr.final).nehari_residual > 0.0;
    }
}

} // namespace detail

// Bisection on t for the boundary between the basin of 0 and the escaping set along the
// ray {t ψ}. The witness is the trajectory from t_star ψ.
inline SeparatrixResult separatrix_scale(const OperatorSet& ops, const Field& a, double p, const Field& psi,
                                         FlowConfig cfg, double bisect_tol) {
    CONEFLOW_REQUIRE(bisect_tol > 0.0, "separatrix_scale: bisect_tol must be positive");
    if (psi.max_abs() == 0.0) throw ValidationError("separatrix_scale: psi is zero");
    cfg.validate();
    cfg = resolve_geometry(ops, a, p, cfg);
    SeparatrixResult res;

    const double tu = nehari_scale(ops, a, p, psi);
    double hi = 1.05 * tu * std::pow(0.5 * p, 1.0 / (p - 2.0));
    for (int k = 0; k < 60 && !(action(ops, a, p, hi * psi).action < 0.0); ++k) hi *= 2.0;

    auto probe = [&](double t) {
        FlowTrace tr = flow(ops, a, p, t * psi, cfg);
        const bool lower = detail::lower_side(ops, a, p, tr);
        res.probes.push_back({t, tr.outcome, lower});
        return std::pair<FlowTrace, bool>(std::move(tr), lower);
    };

    double lo = 0.5 * tu;
    bool found_lo = false;
    for (int k = 0; k < 60; ++k) {
        auto [tr, lower] = probe(lo);
        if (tr.outcome == FlowOutcome::converged_fixed_point && tr.final.max_abs() > 0.0) {
            res.t_star = res.t_lo = res.t_hi = lo;
            res.witness = std::move(tr);
            return res;
        }
        if (lower) {
            found_lo = true;
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    if (!found_lo) throw SolverError("separatrix_scale: no scale in the basin of 0 was found");

    while (hi - lo > bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        auto [tr, lower] = probe(mid);
        if (tr.outcome == FlowOutcome::converged_fixed_point) {
            res.t_star = res.t_lo = res.t_hi = mid;
            res.witness = std::move(tr);
            return res;
        }
        (lower ? lo : hi) = mid;
    }
    res.t_lo = lo;
    res.t_hi = hi;
    res.t_star = 0.5 * (lo + hi);
    res.witness = flow(ops, a, p, res.t_star * psi, cfg);
    return res;
}

struct RefineResult {
    Field u;
    bool converged = false;
    int iterations = 0;
    std::vector<double> phi_history; // ‖Φ‖ after each iterate, starting with the input
    std::string warning;
};

// Newton polish of u = T(u). The Jacobian of G(u) = (K+M)u - M a|u|^{p-2}u is the
// second-variation form, which is indefinite at a mountain-pass point; it is factorised
// directly. Converged means ‖Φ(u)‖ ≤ tol · max(1, ‖u‖).
inline RefineResult refine_fixed_point(const OperatorSet& ops, const Field& a, double p, const Field& u_in,
                                       double tol = 1e-10, int max_iterations = 40) {
    CONEFLOW_REQUIRE(tol > 0.0, "refine_fixed_point: tol must be positive");
    RefineResult out;
    out.u = u_in;
    const Eigen::SparseMatrix<double> A = ops.system();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(A);
    if (chol.info() != Eigen::Success) throw SolverError("refine_fixed_point: H¹ system factorisation failed");

    const Vector m = ops.mass_diag();
    const Vector aw = ops.interior(a);
    auto residual = [&](const Vector& x) {
        Vector f(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) f[k] = aw[k] * signed_power(x[k], p - 1.0);
        return Vector(A * x - m.cwiseProduct(f));
    };
    // ‖Φ‖² = Gᵀ (K+M)^{-1} G.
    auto phi_of = [&](const Vector& G) { return std::sqrt(std::max(0.0, G.dot(chol.solve(G)))); };
    auto scale_of = [&](const Vector& x) { return std::max(1.0, std::sqrt(std::max(0.0, x.dot(A * x)))); };

    Vector x = ops.interior(u_in);
    Vector G = residual(x);
    double phin = phi_of(G);
    out.phi_history.push_back(phin);
    if (phin <= tol * scale_of(x)) {
        out.converged = true;
        return out;
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_done = false;
    for (int it = 1; it <= max_iterations; ++it) {
        Eigen::SparseMatrix<double> J = A;
        for (Eigen::Index k = 0; k < x.size(); ++k)
            J.coeffRef(k, k) -= (p - 1.0) * m[k] * aw[k] * abs_power(x[k], p - 2.0);
        if (!pattern_done) {
            lu.analyzePattern(J);
            pattern_done = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) {
            out.warning = "Jacobian factorisation failed";
            break;
        }
        const Vector dx = lu.solve(G);
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
            const Vector xt = x - lambda * dx;
            const Vector Gt = residual(xt);
            const double pt = phi_of(Gt);
            if (std::isfinite(pt) && pt < phin) {
                x = xt;
                G = Gt;
                phin = pt;
                accepted = true;
                break;
            }
        }
        out.iterations = it;
        out.phi_history.push_back(phin);
        if (!accepted) {
            out.warning = "line search failed at ‖Φ‖=" + std::to_string(phin);
            break;
        }
        if (phin <= tol * scale_of(x)) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) {
        if (out.warning.empty()) out.warning = "Newton did not reach tolerance in " + std::to_string(max_iterations) + " iterations";
        out.u = u_in;
        return out;
    }
    Field u = ops.from_interior(x);
    const auto rep = check_cone(u, 1e-8 * u.max_abs());
    if (!rep.in_cone) {
        out.converged = false;
        out.warning = "Newton limit left the cone: " + describe(rep);
        out.u = u_in;
        return out;
    }
    out.u = std::move(u);
    return out;
}

struct CriticalPointOptions {
    double bisect_tol = 1e-12;
    int rounds = 4;
    double newton_tol = 1e-10;
};

struct CriticalPointResult {
    Field u;
    bool converged = false;
    int rounds = 0;
    SeparatrixResult separatrix; // last round
    RefineResult refine;         // last round
};

// Separatrix bisection along ψ, Newton polish of the closest witness iterate, and restarts
// along the ray through that iterate when the polish fails.
inline CriticalPointResult locate_critical_point(const OperatorSet& ops, const Field& a, double p, const Field& psi,
                                                 const FlowConfig& cfg_in, const CriticalPointOptions& opt = {}) {
    CONEFLOW_REQUIRE(opt.rounds >= 1, "locate_critical_point: rounds must be >= 1");
    const FlowConfig cfg = resolve_geometry(ops, a, p, cfg_in);
    CriticalPointResult res;
    Field dir = psi;
    for (int round = 1; round <= opt.rounds; ++round) {
        res.rounds = round;
        res.separatrix = separatrix_scale(ops, a, p, dir, cfg, opt.bisect_tol);
        const FlowTrace& w = res.separatrix.witness;
        const Field& start = (w.outcome == FlowOutcome::converged_fixed_point) ? w.final : w.best;
        res.refine = refine_fixed_point(ops, a, p, start, opt.newton_tol);
        if (res.refine.converged && std::sqrt(h1_norm_sq(ops, res.refine.u)) > cfg.alpha) {
            res.u = res.refine.u;
            res.converged = true;
            return res;
        }
        dir = start;
    }
    res.u = res.separatrix.witness.best;
    return res;
}

} // namespace coneflow
