#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "coneflow/cone.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/errors.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/linalg.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/radial.hpp"

namespace coneflow {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SpectralOptions {
    // Replace u_rad by 0 in the potential (test mode with a positive spectrum).
    bool zero_potential = false;
    double tol = 1e-10; // on the residual ‖(A - ρM)w‖_{M^{-1}}; the eigenvalue error is quadratic in it
    int max_iterations = 2000;
};

struct SpectralResult {
    int N = 3;
    double alpha1 = kNaN;
    double criterion = kNaN; // α₁ + 2N
    std::vector<double> r_nodes;
    std::vector<double> w; // first eigenfunction, w > 0 inside, ∫ w² r^{N-3} dr = 1
    int iterations = 0;
    double min_probe_rayleigh = kNaN;
    double shift = kNaN;
    // Filled by spectral_crosscheck on a two-dimensional grid.
    double second_variation_value = kNaN;
    double inv_r2_value = kNaN;
    double crosscheck_ratio = kNaN;
};

// Self-adjoint discretisation of
//   -(r^{N-1} w')' + r^{N-1}(1 - (p-1) u^{p-2}) w = α r^{N-3} w
// on the interior nodes: A (tridiagonal) and the diagonal of M.
struct RadialEigenproblem {
    std::vector<double> r;
    Tridiagonal A;
    std::vector<double> M;
};

inline RadialEigenproblem radial_eigenproblem(const RadialSolution& rad, int n1d, const SpectralOptions& opt = {}) {
    CONEFLOW_REQUIRE(rad.size() >= 3, "alpha1_solve: radial solution is empty");
    CONEFLOW_REQUIRE(n1d >= 16, "alpha1_solve: n1d must be >= 16");
    const auto& P = rad.params;
    const RadialForms F(P, n1d);
    const std::vector<double> u = (static_cast<int>(rad.size()) == n1d) ? rad.values
                                                                          : resample_profile(rad.r_nodes, rad.values, F.r);
    const int m = n1d - 2;
    RadialEigenproblem ep;
    ep.r = F.r;
    ep.A.diag.resize(m);
    ep.A.off.resize(m > 1 ? m - 1 : 0);
    ep.M.resize(m);
    for (int k = 1; k + 1 < n1d; ++k) {
        const int q = k - 1;
        const double pot = opt.zero_potential ? 0.0 : (P.p - 1.0) * abs_power(u[k], P.p - 2.0);
        ep.A.diag[q] = F.flux[k - 1] + F.flux[k] + F.mass[k] * (1.0 - pot);
        if (q + 1 < m) ep.A.off[q] = -F.flux[k];
        ep.M[q] = F.h * std::pow(F.r[k], P.N - 3);
    }
    return ep;
}

namespace detail {

inline double m_dot(const std::vector<double>& M, const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += M[k] * x[k] * y[k];
    return s;
}

inline double rayleigh(const RadialEigenproblem& ep, const std::vector<double>& x) {
    const auto Ax = ep.A.apply(x);
    double num = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) num += x[k] * Ax[k];
    return num / m_dot(ep.M, x, x);
}

} // namespace detail

// α₁ by shifted inverse iteration. The shift starts below the smallest Rayleigh quotient
// of 8 probes and is raised towards α₁ as the iterate improves; a Sturm count keeps it
// strictly below α₁ throughout.
inline SpectralResult alpha1_solve(const RadialSolution& rad, int n1d, const SpectralOptions& opt = {}) {
    const RadialEigenproblem ep = radial_eigenproblem(rad, n1d, opt);
    const int m = static_cast<int>(ep.M.size());
    const double R0 = ep.r.front(), width = ep.r.back() - R0;
    const std::vector<double> u_int = [&] {
        const std::vector<double> u = (static_cast<int>(rad.size()) == n1d)
                                          ? rad.values
                                          : resample_profile(rad.r_nodes, rad.values, ep.r);
        return std::vector<double>(u.begin() + 1, u.end() - 1);
    }();

    std::vector<std::vector<double>> probes;
    for (int k = 1; k <= 4; ++k) {
        std::vector<double> x(m);
        for (int q = 0; q < m; ++q) x[q] = std::pow(std::sin(std::numbers::pi * (ep.r[q + 1] - R0) / width), k);
        probes.push_back(std::move(x));
    }
    for (double e : {1.0, 2.0, 4.0, 8.0}) {
        std::vector<double> x(m);
        for (int q = 0; q < m; ++q) x[q] = abs_power(u_int[q], e) + 1e-300;
        if (opt.zero_potential) // u_rad plays no role in this mode; use shifted bumps instead
            for (int q = 0; q < m; ++q) {
                const double s = (ep.r[q + 1] - R0) / width;
                x[q] = std::pow(s, e) * (1.0 - s);
            }
        probes.push_back(std::move(x));
    }
    double rq_min = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    for (const auto& pr : probes) {
        const double rq = detail::rayleigh(ep, pr);
        if (std::isfinite(rq) && rq < rq_min) {
            rq_min = rq;
            x = pr;
        }
    }
    if (!std::isfinite(rq_min)) throw SolverError("alpha1_solve: probe Rayleigh quotients are not finite");

    double gap = std::max(1.0, 0.1 * std::abs(rq_min));
    double sigma = rq_min - gap;
    for (int k = 0; k < 60 && ep.A.count_below(sigma, ep.M) > 0; ++k) {
        gap *= 2.0;
        sigma = rq_min - gap;
    }
    if (ep.A.count_below(sigma, ep.M) > 0) throw SolverError("alpha1_solve: could not place the shift below α₁");

    SpectralResult res;
    res.N = rad.params.N;
    res.min_probe_rayleigh = rq_min;
    double rho = rq_min;
    bool converged = false;
    double prev = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        std::vector<double> sub = ep.A.off, sup = ep.A.off, diag(m), rhs(m);
        for (int q = 0; q < m; ++q) {
            diag[q] = ep.A.diag[q] - sigma * ep.M[q];
            rhs[q] = ep.M[q] * x[q];
        }
        x = solve_tridiagonal(std::move(sub), std::move(diag), std::move(sup), std::move(rhs));
        const double nx = std::sqrt(detail::m_dot(ep.M, x, x));
        if (!(nx > 0.0) || !std::isfinite(nx)) throw SolverError("alpha1_solve: inverse iteration broke down");
        for (double& v : x) v /= nx;
        const auto Ax = ep.A.apply(x);
        rho = 0.0;
        for (int q = 0; q < m; ++q) rho += x[q] * Ax[q];
        double eta = 0.0;
        for (int q = 0; q < m; ++q) {
            const double rr = Ax[q] - rho * ep.M[q] * x[q];
            eta += rr * rr / ep.M[q];
        }
        eta = std::sqrt(eta);
        res.iterations = it;
        const double scale = std::max(1.0, std::abs(rho));
        if (eta <= opt.tol * scale) {
            converged = true;
            break;
        }
        // Residual floor from rounding: ρ has stopped moving.
        stagnant = (std::abs(rho - prev) <= 1e-14 * scale) ? stagnant + 1 : 0;
        if (stagnant >= 3 && eta <= 1e-7 * scale) {
            converged = true;
            break;
        }
        prev = rho;
        const double cand = rho - 1.5 * eta - 1e-12 * scale;
        if (cand > sigma && ep.A.count_below(cand, ep.M) == 0) sigma = cand;
    }
    if (!converged) throw SolverError("alpha1_solve: inverse iteration stagnated", rho);

    double s = 0.0;
    for (double v : x) s += v;
    if (s < 0.0)
        for (double& v : x) v = -v;
    for (double v : x)
        if (!(v > 0.0)) throw SolverError("alpha1_solve: eigenfunction is not positive; not the first mode");

    res.alpha1 = rho;
    res.criterion = rho + 2.0 * res.N;
    res.shift = sigma;
    res.r_nodes = ep.r;
    res.w.assign(ep.r.size(), 0.0);
    std::copy(x.begin(), x.end(), res.w.begin() + 1);
    return res;
}

// v = w(r) (1 - N sin²θ).
inline Field build_instability_direction(const GridPtr& grid, const RadialSolution& rad, const SpectralResult& eig) {
    require_compatible(*grid, rad.params);
    const int N = grid->params().N;
    Field v(grid);
    for (int i = 1; i + 1 < grid->nr(); ++i) {
        const double wr = interpolate_cubic(eig.r_nodes, eig.w, grid->r(i));
        for (int j = 0; j < grid->ntheta(); ++j) {
            const double s = std::sin(grid->theta(j));
            v(i, j) = wr * (1.0 - N * s * s);
        }
    }
    return v;
}

// I''(u_rad)(v, v) against (α₁ + 2N) ∫ v²/r².
inline void spectral_crosscheck(const OperatorSet& ops, const Field& a, double p, const Field& u_rad, const Field& v,
                                SpectralResult& eig) {
    eig.second_variation_value = second_variation(ops, a, p, u_rad, v);
    eig.inv_r2_value = ops.inv_r2_form(v, v);
    eig.crosscheck_ratio = eig.second_variation_value / (eig.criterion * eig.inv_r2_value);
}

struct CertificateReport {
    double alpha1 = kNaN;
    double criterion = kNaN;
    double second_variation_value = kNaN;
    double inv_r2_value = kNaN;
    double crosscheck_ratio = kNaN;
    double action_rad = kNaN;
    double competitor_action = kNaN;
    double competitor_s = kNaN;
    bool radial_refined = false;
    bool competitor_found = false;
    bool nonradial_expected = false;
    Field u_rad; // radial fixed point on the two-dimensional grid
    Field competitor;
};

// Competitor u_* = t (u_rad + s v), t the Nehari scale. Only s > 0 keeps u_* in the cone,
// since v_θ ≤ 0 on (0, π/2); negative s are evaluated but never accepted.
inline CertificateReport nonradiality_certificate(const OperatorSet& ops, const Field& a, double p,
                                                  const RadialSolution& rad, SpectralResult eig) {
    for (double v : a.values())
        if (v != 1.0) throw ValidationError("nonradiality_certificate: the criterion assumes a ≡ 1");
    const GridPtr& grid = ops.grid_ptr();
    CertificateReport rep;
    rep.alpha1 = eig.alpha1;
    rep.criterion = eig.criterion;

    Field ur = lift_radial(grid, rad);
    const RefineResult rr = refine_fixed_point(ops, a, p, ur, 1e-11);
    if (rr.converged) {
        ur = rr.u;
        rep.radial_refined = true;
    }
    const Field v = build_instability_direction(grid, rad, eig);
    spectral_crosscheck(ops, a, p, ur, v, eig);
    rep.second_variation_value = eig.second_variation_value;
    rep.inv_r2_value = eig.inv_r2_value;
    rep.crosscheck_ratio = eig.crosscheck_ratio;
    rep.action_rad = action(ops, a, p, ur).action;
    rep.u_rad = ur;

    if (eig.criterion < 0.0) {
        const double ratio = std::sqrt(h1_norm_sq(ops, ur) / h1_norm_sq(ops, v));
        for (double c : {1e-2, -1e-2, 1e-1, -1e-1}) {
            const double s = c * ratio;
            Field cand = ur;
            cand.axpy(s, v);
            const auto cone = check_cone(cand, 1e-12 * cand.max_abs());
            if (!cone.in_cone) continue;
            cand *= nehari_scale(ops, a, p, cand);
            const double I = action(ops, a, p, cand).action;
            if (!rep.competitor_found || I < rep.competitor_action) {
                rep.competitor_found = true;
                rep.competitor_action = I;
                rep.competitor_s = s;
                rep.competitor = std::move(cand);
            }
        }
        rep.competitor_found = rep.competitor_found && rep.competitor_action < rep.action_rad - 1e-10;
    }
    rep.nonradial_expected = eig.criterion < 0.0 && rep.second_variation_value < 0.0 && rep.competitor_found;
    return rep;
}

enum class SweepMode { vary_p, vary_R };

inline std::string_view to_string(SweepMode m) { return m == SweepMode::vary_p ? "vary_p" : "vary_R"; }

inline SweepMode sweep_mode_from_string(std::string_view s) {
    if (s == "vary_p") return SweepMode::vary_p;
    if (s == "vary_R") return SweepMode::vary_R;
    throw ValidationError("unknown sweep mode '" + std::string(s) + "' (expected vary_p or vary_R)");
}

struct SweepOptions {
    SweepMode mode = SweepMode::vary_p;
    ProblemParams fixed{};
    double lo = 3.0;
    double hi = 20.0;
    int samples = 18;
    int n1d = 513;
    double radial_tol = 1e-10;
    int workers = 1;
    // Exponent fit window; NaN means the top half of [lo, hi].
    double fit_lo = kNaN;
    double fit_hi = kNaN;
    bool refine_threshold = true;
};

struct SweepRow {
    double parameter = kNaN;
    double alpha1 = kNaN;
    double criterion = kNaN;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<double> threshold;
    double threshold_lo = kNaN;
    double threshold_hi = kNaN;
    std::optional<double> fit_exponent;
    double fit_lo = kNaN;
    double fit_hi = kNaN;
    int fit_points = 0;
    int monotone_violations = 0;
    int failures = 0;
};

inline ProblemParams sweep_params(const SweepOptions& o, double value) {
    ProblemParams P = o.fixed;
    if (o.mode == SweepMode::vary_p) {
        P.p = value;
    } else {
        P.R0 = value;
        P.R1 = value + 1.0;
    }
    return P;
}

inline void validate(const SweepOptions& o) {
    CONEFLOW_REQUIRE(o.samples >= 1, "sweep: samples must be >= 1");
    CONEFLOW_REQUIRE(o.lo <= o.hi, "sweep: range must satisfy lo <= hi");
    CONEFLOW_REQUIRE(o.workers >= 1, "sweep: workers must be >= 1");
    CONEFLOW_REQUIRE(o.n1d >= 16, "sweep: n1d must be >= 16");
    if (o.mode == SweepMode::vary_p) {
        CONEFLOW_REQUIRE(o.lo > 2.0, "sweep vary_p: range must lie in p > 2");
    } else {
        CONEFLOW_REQUIRE(o.lo > 0.0, "sweep vary_R: range must lie in R > 0");
        CONEFLOW_REQUIRE(std::abs(o.fixed.R1 - o.fixed.R0 - 1.0) <= 1e-12,
                         "sweep vary_R: annuli have width 1 (R1 = R0 + 1); got R0=" + std::to_string(o.fixed.R0) +
                             ", R1=" + std::to_string(o.fixed.R1));
    }
    sweep_params(o, o.lo).validate();
}

inline SweepRow sweep_sample(const SweepOptions& o, double value) {
    SweepRow row;
    row.parameter = value;
    try {
        const auto rad = solve_radial(sweep_params(o, value), o.n1d, o.radial_tol);
        const auto eig = alpha1_solve(rad, o.n1d);
        row.alpha1 = eig.alpha1;
        row.criterion = eig.criterion;
        row.ok = true;
    } catch (const Error& e) {
        row.error = e.what();
    }
    return row;
}

inline std::vector<double> sweep_values(const SweepOptions& o) {
    std::vector<double> v(o.samples);
    for (int k = 0; k < o.samples; ++k)
        v[k] = (o.samples == 1) ? o.lo : o.lo + (o.hi - o.lo) * k / (o.samples - 1);
    if (o.samples > 1) v.back() = o.hi;
    return v;
}

// Rows computed in earlier runs (matched on the exact parameter value) are reused.
inline SweepResult threshold_sweep(const SweepOptions& o, const std::vector<SweepRow>& known = {}) {
    validate(o);
    const auto values = sweep_values(o);
    SweepResult res;
    res.rows.resize(values.size());
    std::vector<char> todo(values.size(), 1);
    for (std::size_t k = 0; k < values.size(); ++k)
        for (const auto& r : known)
            if (r.ok && r.parameter == values[k]) {
                res.rows[k] = r;
                todo[k] = 0;
            }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < values.size();)
            if (todo[k]) res.rows[k] = sweep_sample(o, values[k]);
    };
    const int nthreads = std::min<int>(o.workers, static_cast<int>(values.size()));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    const SweepRow* prev = nullptr;
    for (const auto& r : res.rows) {
        if (!r.ok) {
            ++res.failures;
            continue;
        }
        if (prev && r.alpha1 > prev->alpha1) ++res.monotone_violations;
        prev = &r;
    }

    // Criterion threshold: first sign change between consecutive successful samples.
    for (std::size_t k = 0; k + 1 < res.rows.size() && !res.threshold; ++k) {
        const auto& A = res.rows[k];
        std::size_t j = k + 1;
        while (j < res.rows.size() && !res.rows[j].ok) ++j;
        if (!A.ok || j >= res.rows.size()) continue;
        const auto& B = res.rows[j];
        if ((A.criterion < 0.0) == (B.criterion < 0.0)) continue;
        double lo = A.parameter, hi = B.parameter;
        const bool lo_negative = A.criterion < 0.0;
        if (o.refine_threshold) {
            while (hi - lo > 5e-4 * std::abs(0.5 * (lo + hi))) {
                const double mid = 0.5 * (lo + hi);
                const SweepRow m = sweep_sample(o, mid);
                if (!m.ok) break;
                ((m.criterion < 0.0) == lo_negative ? lo : hi) = mid;
            }
        }
        res.threshold_lo = lo;
        res.threshold_hi = hi;
        res.threshold = 0.5 * (lo + hi);
    }

    // Least-squares slope of log(-α₁) against log(parameter).
    res.fit_lo = std::isnan(o.fit_lo) ? 0.5 * (o.lo + o.hi) : o.fit_lo;
    res.fit_hi = std::isnan(o.fit_hi) ? o.hi : o.fit_hi;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : res.rows) {
        if (!r.ok || !(r.alpha1 < 0.0) || r.parameter < res.fit_lo || r.parameter > res.fit_hi) continue;
        const double x = std::log(r.parameter), y = std::log(-r.alpha1);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    res.fit_points = n;
    if (n >= 2) {
        const double den = n * sxx - sx * sx;
        if (den > 0.0) res.fit_exponent = (n * sxy - sx * sy) / den;
    }
    return res;
}

} // namespace coneflow
