#pragma once

#include <cmath>
#include <string>

#include "coneflow/errors.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/linalg.hpp"
#include "coneflow/operators.hpp"

namespace coneflow {

inline constexpr double kDefaultCgTol = 1e-12;

// Signed power sign(x)|x|^q, written through exp/log so that non-integer q is safe; 0 at x = 0.
inline double signed_power(double x, double q) {
    if (x == 0.0) return 0.0;
    const double m = std::exp(q * std::log(std::abs(x)));
    return x > 0.0 ? m : -m;
}

inline double abs_power(double x, double q) {
    if (x == 0.0) return 0.0;
    return std::exp(q * std::log(std::abs(x)));
}

// v with B(v, φ) = ∫ h φ for every interior basis field φ, v = 0 on r ∈ {R0, R1}.
// `guess`, when given, seeds the iteration (it must live on the same grid). A positive
// `max_iterations` replaces the default cap.
inline Field resolvent(const OperatorSet& ops, const Field& h, double tol = kDefaultCgTol,
                       const Field* guess = nullptr, int max_iterations = 0) {
    if (!h.all_finite()) throw ValidationError("resolvent: right-hand side is not finite");
    const Vector b = ops.mass_diag().cwiseProduct(ops.interior(h));
    Vector x = guess ? Vector(ops.interior(*guess)) : Vector::Zero(ops.unknowns());
    const int cap =
        max_iterations > 0 ? max_iterations : cg_iteration_cap(static_cast<std::size_t>(ops.unknowns()), tol);
    const CgResult res = pcg_jacobi(ops.system(), ops.system_diag(), b, x, tol, cap);
    if (!res.converged)
        throw SolverError("conjugate gradients did not converge in " + std::to_string(cap) +
                              " iterations (relative residual " + std::to_string(res.relative_residual) + ")",
                          res.relative_residual);
    return ops.from_interior(x);
}

// a |u|^{p-2} u at every node.
inline Field nonlinearity(const Field& a, double p, const Field& u) {
    a.require_same_grid(u);
    Field out(u.grid_ptr());
    for (std::size_t k = 0; k < u.size(); ++k) out[k] = a[k] * signed_power(u[k], p - 1.0);
    return out;
}

// T(u) = (−Δ + Id)^{-1}(a |u|^{p-2} u).
inline Field apply_T(const OperatorSet& ops, const Field& a, double p, const Field& u, const Field* guess = nullptr,
                     double tol = kDefaultCgTol) {
    CONEFLOW_REQUIRE(u.all_finite(), "apply_T: u is not finite");
    return resolvent(ops, nonlinearity(a, p, u), tol, guess);
}

} // namespace coneflow
