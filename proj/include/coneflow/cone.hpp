#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/operators.hpp"

namespace coneflow {

// Which cone a field is tested against: the Dirichlet cone additionally requires
// vanishing values on r ∈ {R0, R1}.
enum class ConeKind { dirichlet, closed };

struct ConeReport {
    double min_value = 0.0;           // most negative value (0 if none)
    double max_even_defect = 0.0;     // max |u(r,θ) - u(r,-θ)|
    double max_monotone_defect = 0.0; // max positive part of u_θ on θ ∈ (0, π/2)
    double boundary_defect = 0.0;     // max |u| on r ∈ {R0, R1}
    double tau = 0.0;
    bool in_cone = true;
};

// Monotonicity is measured both with apply_dtheta and with node-to-node differences on
// [0, π/2], the latter being what the slice bound u(r,θ) ≤ u(r,0) actually needs.
inline ConeReport check_cone(const Field& u, double tau, ConeKind kind = ConeKind::dirichlet) {
    CONEFLOW_REQUIRE(tau >= 0.0, "check_cone: tau must be >= 0");
    const auto& g = u.grid();
    const int nt = g.ntheta();
    const int c = g.center();
    ConeReport rep;
    rep.tau = tau;

    double min_v = 0.0;
    for (double v : u.values()) min_v = std::min(min_v, v);
    rep.min_value = min_v;

    const Field du = apply_dtheta(u);
    for (int i = 0; i < g.nr(); ++i) {
        for (int j = 0; j < c; ++j)
            rep.max_even_defect = std::max(rep.max_even_defect, std::abs(u(i, j) - u(i, nt - 1 - j)));
        for (int j = c + 1; j + 1 < nt; ++j) rep.max_monotone_defect = std::max(rep.max_monotone_defect, du(i, j));
        for (int j = c; j + 1 < nt; ++j)
            rep.max_monotone_defect = std::max(rep.max_monotone_defect, (u(i, j + 1) - u(i, j)) / g.htheta());
    }
    if (kind == ConeKind::dirichlet) rep.boundary_defect = u.max_boundary_abs();

    rep.in_cone = (-rep.min_value <= tau) && rep.max_even_defect <= tau && rep.max_monotone_defect <= tau &&
                  rep.boundary_defect <= tau;
    return rep;
}

inline ConeReport check_cone(const OperatorSet&, const Field& u, double tau, ConeKind kind = ConeKind::dirichlet) {
    return check_cone(u, tau, kind);
}

// Default tolerance for computed (not constructed) fields: 1e-8 ‖u‖_∞.
inline double default_cone_tau(const Field& u, double rel = 1e-8) { return rel * u.max_abs(); }

// max_i (u(r_i, 0) - u(r_i, ±π/2)).
inline double angular_variation(const Field& u) {
    const auto& g = u.grid();
    double v = 0.0;
    for (int i = 0; i < g.nr(); ++i) v = std::max(v, u(i, g.center()) - u(i, g.ntheta() - 1));
    return v;
}

// max over nodes of u(r_i, θ_j) - u(r_i, 0).
inline double slice_domination_defect(const Field& u) {
    const auto& g = u.grid();
    double d = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.nr(); ++i)
        for (int j = 0; j < g.ntheta(); ++j) d = std::max(d, u(i, j) - u(i, g.center()));
    return d;
}

// (u(r, θ) + u(r, -θ)) / 2. Even fields are returned bit-identical.
inline Field symmetrize_theta(const Field& u) {
    const auto& g = u.grid();
    const int nt = g.ntheta();
    Field out = u;
    for (int i = 0; i < g.nr(); ++i)
        for (int j = 0; j < g.center(); ++j) {
            const double m = 0.5 * (u(i, j) + u(i, nt - 1 - j));
            out(i, j) = out(i, nt - 1 - j) = m;
        }
    return out;
}

// Nearest cone member row by row in the quadrature-weighted ℓ² norm: evenness by
// averaging, monotonicity on [0, π/2] by pool-adjacent-violators, then the positive
// part. Identity on fields that already lie in the cone.
inline Field project_cone(const Field& u) {
    const auto& g = u.grid();
    const int nt = g.ntheta(), c = g.center();
    Field out = symmetrize_theta(u);
    const auto W = g.angular_weights();
    std::vector<double> val, wt;
    std::vector<int> len;
    for (int i = 0; i < g.nr(); ++i) {
        val.clear();
        wt.clear();
        len.clear();
        for (int j = c; j < nt; ++j) {
            val.push_back(out(i, j));
            wt.push_back(W[j]);
            len.push_back(1);
            while (val.size() > 1 && val[val.size() - 2] < val.back()) {
                const std::size_t k = val.size() - 1;
                const double w = wt[k - 1] + wt[k];
                val[k - 1] = (wt[k - 1] * val[k - 1] + wt[k] * val[k]) / w;
                wt[k - 1] = w;
                len[k - 1] += len[k];
                val.pop_back();
                wt.pop_back();
                len.pop_back();
            }
        }
        int j = c;
        for (std::size_t b = 0; b < val.size(); ++b)
            for (int q = 0; q < len[b]; ++q, ++j) {
                if (len[b] > 1) out(i, j) = out(i, nt - 1 - j) = val[b];
                if (out(i, j) < 0.0) out(i, j) = out(i, nt - 1 - j) = 0.0;
            }
    }
    return out;
}

inline std::string describe(const ConeReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "min=%.3g even=%.3g monotone=%.3g boundary=%.3g tau=%.3g", r.min_value,
                  r.max_even_defect, r.max_monotone_defect, r.boundary_defect, r.tau);
    return buf;
}

inline Field make_weight(const GridPtr& grid, const WeightFamily& fam) {
    const auto& P = grid->params();
    const double width = P.R1 - P.R0;
    Field a(grid);
    switch (fam.kind) {
    case WeightFamily::Kind::constant:
        CONEFLOW_REQUIRE(fam.value > 0.0, "constant weight must be positive (got " + std::to_string(fam.value) + ")");
        a = Field::from_function(grid, [&](double, double) { return fam.value; });
        break;
    case WeightFamily::Kind::radial_profile:
        CONEFLOW_REQUIRE(fam.exponent > 0.0, "radial weight exponent must be positive");
        CONEFLOW_REQUIRE(fam.epsilon > -1.0, "radial weight 1 + eps x^k needs eps > -1 for positivity (got eps=" +
                                                 std::to_string(fam.epsilon) + ")");
        a = Field::from_function(
            grid, [&](double r, double) { return 1.0 + fam.epsilon * std::pow((r - P.R0) / width, fam.exponent); });
        break;
    case WeightFamily::Kind::angular_profile:
        CONEFLOW_REQUIRE(fam.exponent > 0.0, "angular weight exponent must be positive");
        CONEFLOW_REQUIRE(fam.epsilon > -1.0, "angular weight 1 + eps cos^k needs eps > -1 for positivity (got eps=" +
                                                 std::to_string(fam.epsilon) + ")");
        a = Field::from_function(
            grid, [&](double, double t) { return 1.0 + fam.epsilon * std::pow(std::cos(std::abs(t)), fam.exponent); });
        break;
    }
    double amin = a[0];
    for (double v : a.values()) amin = std::min(amin, v);
    CONEFLOW_REQUIRE(amin > 0.0, "weight is not strictly positive (min " + std::to_string(amin) + ")");
    const auto rep = check_cone(a, 1e-14 * a.max_abs(), ConeKind::closed);
    if (!rep.in_cone)
        throw ValidationError("weight is not even and nonincreasing in θ on (0, π/2): " + describe(rep));
    return a;
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; independent of the library's distributions.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace detail

// Deterministic cone members Σ c_k s_k(r) m_k(θ) with c_k ≥ 0,
//   s_k(x) = x^a (1-x)^b            (vanishes exactly at x = 0, 1)
//   m_k(θ) = cos(|θ|)^q  or  exp(-κ sin²|θ|)   (even, nonincreasing on (0, π/2)).
inline std::vector<Field> sample_cone(const GridPtr& grid, std::uint64_t seed, int count) {
    CONEFLOW_REQUIRE(count >= 1, "sample_cone: count must be >= 1");
    std::mt19937_64 rng(seed);
    const auto& P = grid->params();
    const double width = P.R1 - P.R0;
    std::vector<Field> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s) {
        const int terms = 1 + static_cast<int>(detail::unit_uniform(rng) * 3.0);
        Field u(grid);
        for (int t = 0; t < terms; ++t) {
            const double a = 1.0 + 2.0 * detail::unit_uniform(rng);
            const double b = 1.0 + 2.0 * detail::unit_uniform(rng);
            const bool use_cos = detail::unit_uniform(rng) < 0.5;
            const double q = 4.0 * detail::unit_uniform(rng);
            const double coef = 0.2 + detail::unit_uniform(rng);
            for (int i = 0; i < grid->nr(); ++i) {
                const double x = (grid->r(i) - P.R0) / width;
                const double sr = coef * std::pow(x, a) * std::pow(1.0 - x, b);
                for (int j = 0; j < grid->ntheta(); ++j) {
                    const double th = std::abs(grid->theta(j));
                    const double m = use_cos ? std::pow(std::cos(th), q) : std::exp(-q * std::sin(th) * std::sin(th));
                    u(i, j) += sr * m;
                }
            }
        }
        u.zero_boundary();
        const double scale = u.max_abs();
        if (scale > 0.0) u *= 1.0 / scale;
        out.push_back(std::move(u));
    }
    return out;
}

} // namespace coneflow
