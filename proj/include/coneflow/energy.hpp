#pragma once

#include <cmath>

#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/resolvent.hpp"

namespace coneflow {

struct EnergyBreakdown {
    double h1_sq = 0.0;           // ‖u‖²_{H¹}
    double nonlinear = 0.0;       // ∫ a |u|^p
    double action = 0.0;          // h1_sq / 2 - nonlinear / p
    double nehari_residual = 0.0; // I'(u)u = h1_sq - nonlinear
};

// ∫ a |u|^p with the grid quadrature, in storage order.
inline double nonlinear_integral(const Field& a, double p, const Field& u) {
    a.require_same_grid(u);
    const auto w = u.grid().quad_weights();
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += w[k] * a[k] * abs_power(u[k], p);
    return s;
}

inline EnergyBreakdown action(const OperatorSet& ops, const Field& a, double p, const Field& u) {
    EnergyBreakdown e;
    e.h1_sq = h1_norm_sq(ops, u);
    e.nonlinear = nonlinear_integral(a, p, u);
    e.action = 0.5 * e.h1_sq - e.nonlinear / p;
    e.nehari_residual = e.h1_sq - e.nonlinear;
    return e;
}

// t_u = (‖u‖² / ∫ a|u|^p)^{1/(p-2)}, the unique maximiser of t ↦ I(t u).
inline double nehari_scale(const OperatorSet& ops, const Field& a, double p, const Field& u) {
    const double h1 = h1_norm_sq(ops, u);
    const double nl = nonlinear_integral(a, p, u);
    if (!(nl > 0.0)) throw ValidationError("nehari_scale: u vanishes (∫ a|u|^p = 0)");
    return std::pow(h1 / nl, 1.0 / (p - 2.0));
}

// I'(u)φ = B(u, φ) - ∫ a |u|^{p-2} u φ.
inline double first_variation(const OperatorSet& ops, const Field& a, double p, const Field& u, const Field& phi) {
    const Field f = nonlinearity(a, p, u);
    return ops.stiffness_form(u, phi) - ops.mass_form(f, phi);
}

// Φ(u) = u - T(u); its H¹ norm is the gradient norm of I.
inline Field gradient_field(const OperatorSet& ops, const Field& a, double p, const Field& u,
                            const Field* guess_T = nullptr) {
    return u - apply_T(ops, a, p, u, guess_T);
}

inline double phi_norm(const OperatorSet& ops, const Field& a, double p, const Field& u) {
    const Field g = gradient_field(ops, a, p, u);
    return std::sqrt(std::max(0.0, ops.stiffness_form(g, g)));
}

// I''(u)(v, v) = ‖v‖² - (p-1) ∫ a |u|^{p-2} v².
inline double second_variation(const OperatorSet& ops, const Field& a, double p, const Field& u, const Field& v) {
    if (v.max_boundary_abs() != 0.0) throw ValidationError("second_variation: v has nonzero boundary values");
    a.require_same_grid(u);
    const double quad = ops.stiffness_form(v, v);
    const auto w = u.grid().quad_weights();
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += w[k] * a[k] * abs_power(u[k], p - 2.0) * v[k] * v[k];
    return quad - (p - 1.0) * s;
}

} // namespace coneflow
