#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/linalg.hpp"
#include "coneflow/params.hpp"
#include "coneflow/resolvent.hpp"

namespace coneflow {

// Positive radial solution of -u'' - (N-1)/r u' + u = u^{p-1}, u(R0) = u(R1) = 0.
struct RadialSolution {
    ProblemParams params;
    std::vector<double> r_nodes;
    std::vector<double> values;
    double residual_norm = 0.0;
    int newton_iterations = 0;
    std::string method; // "newton" or "p-continuation"

    std::size_t size() const { return r_nodes.size(); }
    double h() const { return r_nodes[1] - r_nodes[0]; }
    double max_value() const { return *std::max_element(values.begin(), values.end()); }
};

// One-dimensional finite-volume forms, identical to the θ-independent restriction of the
// two-dimensional assembly: fluxes r_{k+1/2}^{N-1}/h, masses h r_k^{N-1}.
struct RadialForms {
    std::vector<double> r;
    std::vector<double> mass; // per node; the end values are the halved trapezoid weights
    std::vector<double> flux; // flux[k] couples k and k+1
    double h = 0.0;

    RadialForms(const ProblemParams& P, int n) {
        CONEFLOW_REQUIRE(n >= 3, "radial forms need at least 3 nodes");
        h = (P.R1 - P.R0) / (n - 1);
        r.resize(n);
        mass.resize(n);
        flux.resize(n - 1);
        for (int k = 0; k < n; ++k) r[k] = P.R0 + k * h;
        r.front() = P.R0;
        r.back() = P.R1;
        for (int k = 0; k < n; ++k) mass[k] = ((k == 0 || k == n - 1) ? 0.5 : 1.0) * h * std::pow(r[k], P.N - 1);
        for (int k = 0; k + 1 < n; ++k) flux[k] = std::pow(0.5 * (r[k] + r[k + 1]), P.N - 1) / h;
    }

    int size() const { return static_cast<int>(r.size()); }

    // (K u)_k at interior nodes with u = 0 at both ends.
    double stiffness_row(const std::vector<double>& u, int k) const {
        return flux[k - 1] * (u[k] - u[k - 1]) + flux[k] * (u[k] - u[k + 1]);
    }

    double h1_sq(const std::vector<double>& u) const {
        double s = 0.0;
        for (int k = 0; k + 1 < size(); ++k) s += flux[k] * (u[k + 1] - u[k]) * (u[k + 1] - u[k]);
        for (int k = 1; k + 1 < size(); ++k) s += mass[k] * u[k] * u[k];
        return s;
    }
    double power_integral(const std::vector<double>& u, double q) const {
        double s = 0.0;
        for (int k = 1; k + 1 < size(); ++k) s += mass[k] * abs_power(u[k], q);
        return s;
    }

    // G_k = (K u + M u - M u^{p-1})_k / M_k at interior nodes, i.e. the pointwise equation residual.
    std::vector<double> residual(const std::vector<double>& u, double p) const {
        std::vector<double> g(size(), 0.0);
        for (int k = 1; k + 1 < size(); ++k)
            g[k] = stiffness_row(u, k) / mass[k] + u[k] - signed_power(u[k], p - 1.0);
        return g;
    }
};

namespace detail {

inline double radial_relative_residual(const RadialForms& F, const std::vector<double>& u, double p) {
    const auto g = F.residual(u, p);
    double num = 0.0, den = 1.0;
    for (int k = 1; k + 1 < F.size(); ++k) {
        num = std::max(num, std::abs(g[k]));
        den = std::max(den, abs_power(u[k], p - 1.0));
    }
    return num / den;
}

// Residual level reachable in double precision: a few ulps of the largest term of the
// mass-scaled stiffness row, relative to the same normaliser. Dominates tol only on very fine grids.
inline double radial_rounding_floor(const RadialForms& F, const std::vector<double>& u, double p) {
    double big = 0.0, den = 1.0;
    for (int k = 1; k + 1 < F.size(); ++k) {
        big = std::max(big, std::abs(u[k]) * (F.flux[k - 1] + F.flux[k]) / F.mass[k]);
        den = std::max(den, abs_power(u[k], p - 1.0));
    }
    return 4.0 * std::numeric_limits<double>::epsilon() * big / den;
}

inline void nehari_normalize(const RadialForms& F, std::vector<double>& u, double p) {
    const double t = std::pow(F.h1_sq(u) / F.power_integral(u, p), 1.0 / (p - 2.0));
    for (double& v : u) v *= t;
}

// Damped Newton with positivity safeguard. Returns true on convergence; u is overwritten.
inline bool radial_newton(const RadialForms& F, std::vector<double>& u, double p, double tol, int& iterations,
                          int max_iterations = 100) {
    const int n = F.size();
    const int m = n - 2;
    auto merit = [&](const std::vector<double>& x) {
        const auto g = F.residual(x, p);
        double s = 0.0;
        for (int k = 1; k + 1 < n; ++k) s += g[k] * g[k];
        return std::sqrt(s);
    };
    double f = merit(u);
    for (int it = 0; it < max_iterations; ++it) {
        if (!std::isfinite(f)) return false;
        if (radial_relative_residual(F, u, p) <= std::max(tol, radial_rounding_floor(F, u, p))) return true;
        // Jacobian of the mass-scaled residual, tridiagonal in the interior unknowns.
        std::vector<double> sub(m - 1 > 0 ? m - 1 : 0), diag(m), sup(m - 1 > 0 ? m - 1 : 0), rhs(m);
        const auto g = F.residual(u, p);
        for (int k = 1; k + 1 < n; ++k) {
            const int q = k - 1;
            diag[q] = (F.flux[k - 1] + F.flux[k]) / F.mass[k] + 1.0 - (p - 1.0) * abs_power(u[k], p - 2.0);
            if (q > 0) sub[q - 1] = -F.flux[k - 1] / F.mass[k];
            if (q + 1 < m) sup[q] = -F.flux[k] / F.mass[k];
            rhs[q] = g[k];
        }
        std::vector<double> dx;
        try {
            dx = solve_tridiagonal(sub, diag, sup, rhs);
        } catch (const SolverError&) {
            return false;
        }
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
            std::vector<double> ut = u;
            bool positive = true;
            for (int k = 1; k + 1 < n; ++k) {
                ut[k] -= lambda * dx[k - 1];
                positive = positive && ut[k] > 0.0;
            }
            if (!positive) continue;
            const double ft = merit(ut);
            if (std::isfinite(ft) && ft < (1.0 - 1e-4 * lambda) * f) {
                u = std::move(ut);
                f = ft;
                accepted = true;
                break;
            }
        }
        ++iterations;
        if (!accepted) return radial_relative_residual(F, u, p) <= std::max(tol, radial_rounding_floor(F, u, p));
    }
    return radial_relative_residual(F, u, p) <= std::max(tol, radial_rounding_floor(F, u, p));
}

inline std::vector<double> bump_guess(const RadialForms& F, double p, int shape) {
    std::vector<double> u(F.size(), 0.0);
    const double R0 = F.r.front(), width = F.r.back() - R0;
    const double k = (shape == 0) ? 1.0 : (shape == 1 ? 2.0 : 4.0);
    for (int j = 1; j + 1 < F.size(); ++j) u[j] = std::pow(std::sin(std::numbers::pi * (F.r[j] - R0) / width), k);
    nehari_normalize(F, u, p);
    return u;
}

} // namespace detail

// Damped Newton from positive bumps of three widths; if all fail, continuation in p
// starting from p = 3.
inline RadialSolution solve_radial(const ProblemParams& params, int n1d, double tol = 1e-10) {
    params.validate();
    CONEFLOW_REQUIRE(n1d >= 16, "solve_radial: n1d must be >= 16 (got " + std::to_string(n1d) + ")");
    CONEFLOW_REQUIRE(tol > 0.0, "solve_radial: tol must be positive");
    const RadialForms F(params, n1d);
    const double p = params.p;

    RadialSolution sol;
    sol.params = params;
    sol.r_nodes = F.r;

    auto finish = [&](std::vector<double> u, int its, const char* method) {
        u.front() = u.back() = 0.0;
        sol.values = std::move(u);
        sol.newton_iterations = its;
        sol.method = method;
        sol.residual_norm = detail::radial_relative_residual(F, sol.values, p);
        return sol;
    };

    int its = 0;
    for (int shape = 0; shape < 3; ++shape) {
        auto u = detail::bump_guess(F, p, shape);
        if (detail::radial_newton(F, u, p, tol, its)) return finish(std::move(u), its, "newton");
    }

    // Continuation: solve at p = 3, then move towards the target in steps of at most 0.5,
    // halving the step whenever Newton fails.
    double pc = 3.0;
    auto u = detail::bump_guess(F, pc, 0);
    if (!detail::radial_newton(F, u, pc, tol, its))
        throw SolverError("solve_radial: Newton failed for every initial bump and at the continuation start p=3");
    double step = 0.5;
    while (pc != p) {
        const double dir = (p > pc) ? 1.0 : -1.0;
        const double pn = (std::abs(p - pc) <= step) ? p : pc + dir * step;
        auto trial = u;
        detail::nehari_normalize(F, trial, pn);
        if (detail::radial_newton(F, trial, pn, tol, its)) {
            u = std::move(trial);
            pc = pn;
            step = std::min(0.5, 1.5 * step);
        } else {
            step *= 0.5;
            if (step < 1e-4)
                throw SolverError("solve_radial: p-continuation stalled at p=" + std::to_string(pc));
        }
    }
    return finish(std::move(u), its, "p-continuation");
}

// Cubic Lagrange interpolation of a nodal profile at x; exact at the nodes.
inline double interpolate_cubic(const std::vector<double>& r, const std::vector<double>& v, double x) {
    const int n = static_cast<int>(r.size());
    const double h = (r.back() - r.front()) / (n - 1);
    const double s = (x - r.front()) / h;
    const int nearest = static_cast<int>(std::lround(s));
    if (nearest >= 0 && nearest < n && std::abs(s - nearest) <= 1e-10) return v[nearest];
    int k = static_cast<int>(std::floor(s)) - 1;
    k = std::clamp(k, 0, std::max(0, n - 4));
    double out = 0.0;
    for (int a = k; a < std::min(k + 4, n); ++a) {
        double l = 1.0;
        for (int b = k; b < std::min(k + 4, n); ++b)
            if (b != a) l *= (x - r[b]) / (r[a] - r[b]);
        out += l * v[a];
    }
    return out;
}

inline std::vector<double> resample_profile(const std::vector<double>& r, const std::vector<double>& v,
                                            const std::vector<double>& targets) {
    std::vector<double> out(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) out[k] = interpolate_cubic(r, v, targets[k]);
    return out;
}

inline void require_compatible(const AnnulusGrid& grid, const ProblemParams& rp) {
    const auto& gp = grid.params();
    const double tol = 1e-12 * std::max(1.0, gp.R1);
    if (gp.N != rp.N || std::abs(gp.R0 - rp.R0) > tol || std::abs(gp.R1 - rp.R1) > tol)
        throw GridMismatch("radial profile and grid have different dimension or radii");
}

// θ-independent field with values interpolated from a radial profile.
inline Field lift_profile(const GridPtr& grid, const ProblemParams& rp, const std::vector<double>& r,
                          const std::vector<double>& values) {
    require_compatible(*grid, rp);
    Field out(grid);
    for (int i = 1; i + 1 < grid->nr(); ++i) {
        const double v = interpolate_cubic(r, values, grid->r(i));
        for (int j = 0; j < grid->ntheta(); ++j) out(i, j) = v;
    }
    return out;
}

inline Field lift_radial(const GridPtr& grid, const RadialSolution& rad) {
    return lift_profile(grid, rad.params, rad.r_nodes, rad.values);
}

} // namespace coneflow
